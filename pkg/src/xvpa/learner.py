"""Incremental learning: state naming, updates, unlearning, sanitization.

States are named from stream prefixes so that equally named states merge;
the naming schemes bound the left-sibling memory by ``k`` and the typing
context by ``l``, which fixes the hypothesis space.  Learning a document
is one pass that increments counters along the run, creating states and
transitions on first contact.  Mind changes (counters flipping from zero
to one) are recorded per document as a convergence heuristic.

Unlearning replays a previously learned document and decrements exactly
what learning incremented; sanitization uniformly decrements all
transition counters to shake out rare, possibly poisoned structure.

A learner instance admits one mutator at a time.  Snapshots taken between
mutations are immutable; validators built from them never block learning.
"""

from __future__ import annotations

from dataclasses import dataclass

from .events import END, START, DocumentEventStream
from .weighted import START_STATE, TEXT_PLACEHOLDER, StateName, WeightedVpa

ANCESTOR = "ancestor"
ANCESTOR_SIBLING = "ancestor-sibling"


class LearnerError(ValueError):
    pass


class MissingTransitionError(LearnerError):
    """An unlearn run left the automaton: the document was never learned
    (or was already unlearned).  No mutation has happened."""

    def __init__(self, index, detail=""):
        self.index = index
        super().__init__(f"run leaves the automaton at event {index}" + (f" ({detail})" if detail else ""))


class CounterUnderflowError(LearnerError):
    """A decrement would drive a counter below zero.  No mutation."""


class SanitizedStateError(LearnerError):
    """Unlearning after sanitize is unsound and therefore refused."""


class DatatypeMismatchError(LearnerError):
    """The active datatype definition file differs from the one the state
    was created with."""


@dataclass(frozen=True)
class NamingScheme:
    """Naming mode plus locality bounds (k: left siblings, l: context)."""

    mode: str = ANCESTOR
    k: int = 1
    l: int = 1

    def __post_init__(self):
        if self.mode not in (ANCESTOR, ANCESTOR_SIBLING):
            raise ValueError(f"unknown naming mode {self.mode!r}")
        if self.k < 1 or self.l < 1:
            raise ValueError("locality bounds k and l must be >= 1")


def call_name(scheme: NamingScheme, q: StateName, element: str) -> StateName:
    """Target state of a call: fresh sibling string, extended context."""
    ctx, sibs = q
    if scheme.mode == ANCESTOR:
        return ((ctx + (element,))[-scheme.l:], ())
    segment = (sibs + (element,))[-scheme.k:]
    return (ctx[-scheme.l:] + (segment,), ())


def int_name(scheme: NamingScheme, q: StateName) -> StateName:
    """Target state after text: context kept, placeholder appended."""
    ctx, sibs = q
    return (ctx, (sibs + (TEXT_PLACEHOLDER,))[-scheme.k:])


def ret_name(scheme: NamingScheme, q: StateName, popped: StateName, element: str) -> StateName:
    """Target state of a return: the popped state's context, the closed
    element appended to its siblings."""
    ctx, sibs = popped
    return (ctx, (sibs + (element,))[-scheme.k:])


class Learner:
    """Persistent learner state: weighted VPA, scheme, and bookkeeping."""

    def __init__(self, dts, scheme: NamingScheme):
        self.dts = dts
        self.scheme = scheme
        self.dts_hash = dts.content_hash
        self.vpa = WeightedVpa()
        self.documents_learned = 0
        self.mind_changes: list[int] = []
        self.sanitized = False

    # -- learning -------------------------------------------------------------

    def learn(self, stream: DocumentEventStream) -> int:
        """One-pass incremental update; returns this document's mind changes.

        The stream must be a validated DocumentEventStream; on that
        precondition the pass cannot fail midway, so the update is applied
        directly and is per-document atomic.
        """
        self._check_input(stream)
        v = self.vpa
        scheme = self.scheme
        changes = 0

        def bump(weights, key) -> None:
            nonlocal changes
            old = weights.get(key, 0)
            weights[key] = old + 1
            if old == 0:
                changes += 1

        stack: list[StateName] = []
        q = START_STATE
        for event in stream:
            if event.kind == START:
                element = event.label.render()
                q2 = call_name(scheme, q, element)
                v.states.add(q2)
                bump(v.w_state, q2)
                v.call_to[(q, element)] = q2
                bump(v.w_call, (q, element))
                stack.append(q)
                q = q2
            elif event.kind == END:
                element = event.label.render()
                popped = stack.pop()
                q2 = ret_name(scheme, q, popped, element)
                v.states.add(q2)
                bump(v.w_state, q2)
                v.ret_to[(q, element, popped)] = q2
                bump(v.w_ret, (q, element, popped))
                q = q2
            else:
                inferred = self.dts.infer(event.label)
                q2 = int_name(scheme, q)
                v.states.add(q2)
                bump(v.w_state, q2)
                v.int_to[q] = q2
                for dt in sorted(inferred):
                    bump(v.w_int, (q, dt))
                q = q2
        v.finals.add(q)
        bump(v.w_final, q)

        self.documents_learned += 1
        self.mind_changes.append(changes)
        return changes

    # -- unlearning -----------------------------------------------------------

    def unlearn(self, stream: DocumentEventStream) -> None:
        """Exactly reverse one previously learned document.

        The whole run is simulated first; only when every transition exists
        and no counter would underflow are the decrements applied, so a
        failed unlearn leaves the state untouched.
        """
        if self.sanitized:
            raise SanitizedStateError("unlearn is unsound after sanitize")
        self._check_input(stream)
        v = self.vpa
        dec_state: dict[StateName, int] = {}
        dec_final: dict[StateName, int] = {}
        dec_call: dict[tuple, int] = {}
        dec_int: dict[tuple, int] = {}
        dec_ret: dict[tuple, int] = {}

        def note(table, key):
            table[key] = table.get(key, 0) + 1

        stack: list[StateName] = []
        q = START_STATE
        for event in stream:
            if event.kind == START:
                element = event.label.render()
                key = (q, element)
                if v.w_call.get(key, 0) <= 0:
                    raise MissingTransitionError(event.index, f"no call on {element}")
                q2 = v.call_to[key]
                note(dec_call, key)
                note(dec_state, q2)
                stack.append(q)
                q = q2
            elif event.kind == END:
                element = event.label.render()
                popped = stack.pop()
                key = (q, element, popped)
                if v.w_ret.get(key, 0) <= 0:
                    raise MissingTransitionError(event.index, f"no return on {element}")
                q2 = v.ret_to[key]
                note(dec_ret, key)
                note(dec_state, q2)
                q = q2
            else:
                inferred = self.dts.infer(event.label)
                q2 = v.int_to.get(q)
                if q2 is None:
                    raise MissingTransitionError(event.index, "no text transition")
                for dt in sorted(inferred):
                    if v.w_int.get((q, dt), 0) <= 0:
                        raise MissingTransitionError(event.index, f"no text transition on {dt}")
                    note(dec_int, (q, dt))
                note(dec_state, q2)
                q = q2
        note(dec_final, q)

        for table, decs in ((v.w_state, dec_state), (v.w_final, dec_final),
                            (v.w_call, dec_call), (v.w_int, dec_int), (v.w_ret, dec_ret)):
            for key, count in decs.items():
                if table.get(key, 0) - count < 0:
                    raise CounterUnderflowError(f"counter for {key!r} would underflow")

        # commit
        for table, decs in ((v.w_state, dec_state), (v.w_final, dec_final),
                            (v.w_call, dec_call), (v.w_int, dec_int), (v.w_ret, dec_ret)):
            for key, count in decs.items():
                table[key] -= count
        self._prune_zeros()
        self.documents_learned -= 1
        if self.mind_changes:
            self.mind_changes.pop()

    def _prune_zeros(self):
        v = self.vpa
        for key in [k for k, w in v.w_call.items() if w <= 0]:
            del v.w_call[key]
            del v.call_to[key]
        for key in [k for k, w in v.w_ret.items() if w <= 0]:
            del v.w_ret[key]
            del v.ret_to[key]
        for key in [k for k, w in v.w_int.items() if w <= 0]:
            del v.w_int[key]
        live_int_sources = {src for (src, _dt) in v.w_int}
        for src in [s for s in v.int_to if s not in live_int_sources]:
            del v.int_to[src]
        for q in [q for q, w in v.w_final.items() if w <= 0]:
            del v.w_final[q]
            v.finals.discard(q)
        for q in [q for q, w in v.w_state.items() if w <= 0]:
            del v.w_state[q]
            if q != START_STATE:
                v.states.discard(q)

    # -- sanitization -----------------------------------------------------------

    def sanitize(self) -> bool:
        """Trim low-frequency structure by a uniform counter decrement.

        Stage 1 decrements every transition counter by one (floored at
        zero) and recomputes each non-start state's counter as the sum of
        its incoming transition weights (finals take the recomputed state
        weight).  Stage 2 removes states left unreachable from the start.
        If no reachable final state would survive, everything reverts and
        False is returned (not applicable); otherwise the trimmed result
        replaces the learner's automaton and True is returned.

        Sanitizing marks the state: subsequent unlearns are refused.
        """
        v = self.vpa
        w_call = {k: max(0, w - 1) for k, w in v.w_call.items()}
        w_ret = {k: max(0, w - 1) for k, w in v.w_ret.items()}
        w_int = {k: max(0, w - 1) for k, w in v.w_int.items()}

        incoming: dict[StateName, int] = {}
        for key, w in w_call.items():
            dst = v.call_to[key]
            incoming[dst] = incoming.get(dst, 0) + w
        for key, w in w_ret.items():
            dst = v.ret_to[key]
            incoming[dst] = incoming.get(dst, 0) + w
        for (src, _dt), w in w_int.items():
            dst = v.int_to[src]
            incoming[dst] = incoming.get(dst, 0) + w
        w_state = {q: incoming.get(q, 0) for q in v.states if q != START_STATE}
        w_final = {q: w_state.get(q, 0) for q in v.finals}

        def reachable() -> set[StateName]:
            adj: dict[StateName, set[StateName]] = {}
            for key, w in w_call.items():
                if w > 0 and w_state.get(v.call_to[key], 0) > 0:
                    adj.setdefault(key[0], set()).add(v.call_to[key])
            for key, w in w_ret.items():
                if w > 0 and w_state.get(v.ret_to[key], 0) > 0:
                    adj.setdefault(key[0], set()).add(v.ret_to[key])
            for (src, _dt), w in w_int.items():
                if w > 0 and w_state.get(v.int_to[src], 0) > 0:
                    adj.setdefault(src, set()).add(v.int_to[src])
            seen = {START_STATE}
            work = [START_STATE]
            while work:
                s = work.pop()
                for t in adj.get(s, ()):
                    if t not in seen:
                        seen.add(t)
                        work.append(t)
            return seen

        live = reachable()
        unreachable = {q for q in v.states if q != START_STATE and q not in live}
        surviving_finals = {q for q, w in w_final.items() if w > 0 and q not in unreachable}
        if not surviving_finals:
            return False  # revert: nothing was mutated

        if unreachable:
            for key in w_call:
                if v.call_to[key] in unreachable or key[0] in unreachable:
                    w_call[key] = 0
            for key in w_ret:
                if v.ret_to[key] in unreachable or key[0] in unreachable:
                    w_ret[key] = 0
            for key in list(w_int):
                src = key[0]
                if v.int_to[src] in unreachable or src in unreachable:
                    w_int[key] = 0
            for q in unreachable:
                w_state[q] = 0
                w_final.pop(q, None)

        v.w_call, v.w_ret, v.w_int = w_call, w_ret, w_int
        v.w_state = {q: w for q, w in w_state.items() if w > 0}
        v.w_final = {q: w for q, w in w_final.items() if w > 0}
        v.finals = set(v.w_final)
        v.states = set(v.w_state) | {START_STATE}
        self._prune_zeros()
        # full trim semantics: drop datatype transitions subsumed by a kept one
        snap = v.trimmed(self.dts)
        self.vpa = snap
        self.sanitized = True
        return True

    # -- queries ---------------------------------------------------------------

    def snapshot(self) -> WeightedVpa:
        """Trimmed, immutable view of the current automaton."""
        return self.vpa.trimmed(self.dts)

    def mind_change_series(self) -> list[int]:
        return list(self.mind_changes)

    def _check_input(self, stream):
        if not isinstance(stream, DocumentEventStream):
            raise TypeError("learner operations require a DocumentEventStream")
        if self.dts.content_hash != self.dts_hash:
            raise DatatypeMismatchError(
                "datatype definition file changed since this state was created")
