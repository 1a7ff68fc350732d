"""Modular typed automata and one-pass stream validation.

A trimmed learner snapshot becomes a dXVPA: states partition into modules
by typing context, each module has a single entry, exit states share their
return transitions (single-exit property), and internal transitions carry
datatype choices.  Congruent modules for the same element are folded.
Compilation replaces each state's datatype choice by a single predicate
acceptor (the determinized, minimized union of the members' lexical
acceptors) so validation checks every text exactly once.

Generated automata are immutable; validation is reentrant and safe for
concurrent use across streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dfa import Dfa, union_dfas
from .events import CHARS, END, START, QName
from .weighted import START_STATE, StateName, WeightedVpa

UNEXPECTED_ELEMENT = "unexpected-element"
UNEXPECTED_END = "unexpected-end"
DATATYPE_MISMATCH = "datatype-mismatch"
PREMATURE_EOF = "premature-eof"
TRAILING_CONTENT = "trailing-content"
EMPTY_LANGUAGE = "empty-language"


class EmptyLanguageError(ValueError):
    """The snapshot has no reachable final state: nothing to generate."""


class AutomatonStructureError(ValueError):
    """The snapshot violates an assumption of automaton generation."""


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None
    event_index: int | None = None
    state: str | None = None

    def __bool__(self):
        return self.accepted


ACCEPT = Verdict(True)


@dataclass
class Module:
    """One schema type: entry, exits, and its three transition relations.

    ``calls`` map (state, element) to the callee module; ``internals`` map
    a state to its unique successor and datatype choice; ``returns`` map
    (state, element, popped state) to a state of the calling module.
    Returns that pop the start state close the root element and are kept
    out of ``returns``: they are represented by module exits + finals.
    """

    context: tuple
    element: str
    states: set = field(default_factory=set)
    entry: StateName = None
    exits: set = field(default_factory=set)
    calls: dict = field(default_factory=dict)
    internals: dict = field(default_factory=dict)
    returns: dict = field(default_factory=dict)


class Dxvpa:
    """Datatyped modular automaton over a lexical datatype system."""

    def __init__(self, modules, m0, root_element, dts):
        self.modules: dict[tuple, Module] = modules
        self.m0 = m0
        self.root_element = root_element
        self.dts = dts
        self.finals = frozenset(modules[m0].exits)
        self._check_structure()

    def _check_structure(self):
        internal_targets = set()
        for key, mod in self.modules.items():
            if mod.entry not in mod.states:
                raise AutomatonStructureError(f"module {key!r} lacks its entry state")
            # single-exit: all exits carry identical return behavior
            signatures = {
                x: frozenset((c, p, t) for (q, c, p), t in mod.returns.items() if q == x)
                for x in mod.exits
            }
            if len(set(signatures.values())) > 1:
                raise AutomatonStructureError(f"module {key!r} breaks the single-exit property")
            internal_targets.update(dst for dst, _ in mod.internals.values())
        # mixed content: the unique datatype-choice successor is structural
        # (internals is a map); no return may target such a successor
        for mod in self.modules.values():
            for (_q, _c, _p), target in mod.returns.items():
                if target in internal_targets:
                    raise AutomatonStructureError(
                        "return transition targets a datatype-choice successor")

    def module_of(self, state: StateName):
        return self.modules[state[0]]

    def stats(self):
        return {
            "modules": len(self.modules),
            "states": sum(len(m.states) for m in self.modules.values()),
            "calls": sum(len(m.calls) for m in self.modules.values()),
            "internals": sum(len(m.internals) for m in self.modules.values()),
            "returns": sum(len(m.returns) for m in self.modules.values()),
        }


class Cxvpa:
    """Predicate-transition automaton for one-pass validation.

    Structure mirrors the dXVPA it was compiled from; every datatype
    choice is fused into one deterministic acceptor, at most one internal
    transition per state.
    """

    def __init__(self, dxvpa: Dxvpa, predicates, int_map):
        self.root_element = dxvpa.root_element
        self.m0 = dxvpa.m0
        self.entry0 = dxvpa.modules[dxvpa.m0].entry
        self.finals = dxvpa.finals
        self.predicates: dict[frozenset, Dfa] = predicates
        self.call_map: dict[tuple, StateName] = {}
        self.ret_map: dict[tuple, StateName] = {}
        self.int_map: dict[StateName, tuple[StateName, frozenset]] = int_map
        for mod in dxvpa.modules.values():
            for (q, c), callee in mod.calls.items():
                self.call_map[(q, c)] = dxvpa.modules[callee].entry
            for key, target in mod.returns.items():
                self.ret_map[key] = target

    def predicate_for(self, state: StateName) -> Dfa | None:
        hit = self.int_map.get(state)
        return self.predicates[hit[1]] if hit else None


# ---------------------------------------------------------------------------
# generation from a snapshot

def build_xvpa(snapshot: WeightedVpa, dts, minimize_modules: bool = True) -> Dxvpa:
    """Assemble a dXVPA from a trimmed snapshot.

    Modules are the distinct nonempty typing contexts; the start module is
    the one called from the start state; each module's entry is the state
    with empty siblings; exits are states with outgoing returns; the
    single-exit property is established by copying every return of a
    module to all of its exits.
    """
    root_calls = {key: dst for key, dst in snapshot.call_to.items() if key[0] == START_STATE}
    if not root_calls or not snapshot.finals:
        raise EmptyLanguageError("snapshot accepts no document")
    root_elements = sorted({key[1] for key in root_calls})
    if len(root_elements) > 1:
        raise AutomatonStructureError(
            f"snapshot has multiple root elements {root_elements}; one start module required")
    root_element = root_elements[0]

    contexts = {q[0] for q in snapshot.states if q[0] != ()}
    modules: dict[tuple, Module] = {}
    for ctx in contexts:
        entry = (ctx, ())
        mod = Module(context=ctx, element="", entry=entry)
        mod.states = {q for q in snapshot.states if q[0] == ctx}
        if entry not in mod.states:
            raise AutomatonStructureError(f"module {ctx!r} lacks entry state")
        modules[ctx] = mod

    m0 = next(iter(root_calls.values()))[0]

    # transitions, partitioned by source module
    for (q, c), dst in snapshot.call_to.items():
        if q == START_STATE:
            continue
        modules[q[0]].calls[(q, c)] = dst[0]
    for src, dst in snapshot.int_to.items():
        dtset = snapshot.internal_datatypes(src)
        if dtset:
            modules[src[0]].internals[src] = (dst, dtset)
    for (q, c, popped), dst in snapshot.ret_to.items():
        mod = modules[q[0]]
        mod.exits.add(q)
        if popped == START_STATE:
            continue  # root return: represented by finals
        mod.returns[(q, c, popped)] = dst

    # element assignment: the element whose calls enter the module
    entry_elements: dict[tuple, set[str]] = {ctx: set() for ctx in modules}
    entry_elements[m0].add(root_element)
    for mod in modules.values():
        for (q, c), callee in mod.calls.items():
            entry_elements[callee].add(c)
    for ctx, mod in modules.items():
        elements = entry_elements[ctx]
        if len(elements) != 1:
            raise AutomatonStructureError(
                f"module {ctx!r} entered by elements {sorted(elements)}; expected exactly one")
        mod.element = elements.pop()

    # single-exit closure: every exit carries every return of its module
    for mod in modules.values():
        rows = list(mod.returns.items())
        for x in mod.exits:
            for (q, c, popped), dst in rows:
                mod.returns[(x, c, popped)] = dst

    dxvpa = Dxvpa(modules, m0, root_element, dts)
    if minimize_modules:
        dxvpa = minimize(dxvpa)
    return dxvpa


# ---------------------------------------------------------------------------
# module minimization

def minimize(dxvpa: Dxvpa) -> Dxvpa:
    """Fold congruent modules mapped to the same element.

    Congruence is bisimilarity of the module graphs where internal edges
    compare by exact datatype choice and call edges by (element, callee
    module); the pairing must be a bijection.  After each fold the scan
    restarts until no pair folds.  The input is not mutated.
    """
    modules = {k: _copy_module(m) for k, m in dxvpa.modules.items()}
    m0 = dxvpa.m0

    changed = True
    while changed:
        changed = False
        keys = sorted(modules, key=repr)
        for i, key_m in enumerate(keys):
            for key_n in keys[i + 1:]:
                m, n = modules[key_m], modules[key_n]
                if m.element != n.element:
                    continue
                pairing = _bisimulation(modules, m, n)
                if pairing is None:
                    continue
                _fold(modules, key_m, key_n, pairing)
                if m0 == key_n:
                    m0 = key_m
                changed = True
                break
            if changed:
                break
    return Dxvpa(modules, m0, dxvpa.root_element, dxvpa.dts)


def _copy_module(m: Module) -> Module:
    return Module(context=m.context, element=m.element, states=set(m.states),
                  entry=m.entry, exits=set(m.exits), calls=dict(m.calls),
                  internals=dict(m.internals), returns=dict(m.returns))


def _module_edges(modules: dict, mod: Module, state: StateName):
    """Outgoing edges of a state in the module-graph view.

    A call edge is labeled (element, callee module) and leads to the state
    this module resumes in after the callee returns popping ``state``;
    root-module calls that never resume map to None."""
    edges = {}
    hit = mod.internals.get(state)
    if hit:
        dst, dtset = hit
        edges[("text", dtset)] = dst
    for (q, c), callee_key in mod.calls.items():
        if q != state:
            continue
        callee = modules[callee_key]
        resume = {t for (_x, _c, popped), t in callee.returns.items()
                  if popped == state and _c == c}
        edges[("call", c, callee_key)] = resume.pop() if resume else None
    return edges


def _bisimulation(modules: dict, m: Module, n: Module):
    """Entry-rooted pairing of two module graphs, or None.

    Requires identical edge labels at every paired state, identical
    exit status, and a bijective pairing.
    """
    pairing: dict[StateName, StateName] = {}
    reverse: dict[StateName, StateName] = {}
    work = [(n.entry, m.entry)]
    while work:
        qn, qm = work.pop()
        if qn in pairing:
            if pairing[qn] != qm:
                return None
            continue
        if qm in reverse and reverse[qm] != qn:
            return None
        if (qn in n.exits) != (qm in m.exits):
            return None
        edges_n = _module_edges(modules, n, qn)
        edges_m = _module_edges(modules, m, qm)
        if set(edges_n) != set(edges_m):
            return None
        pairing[qn] = qm
        reverse[qm] = qn
        for label, target_n in edges_n.items():
            target_m = edges_m[label]
            if (target_n is None) != (target_m is None):
                return None
            if target_n is not None:
                work.append((target_n, target_m))
    return pairing


def _fold(modules: dict, key_m: tuple, key_n: tuple, pairing: dict):
    """Fold module n into m, rewriting calls and returns of its neighbors."""
    m, n = modules[key_m], modules[key_n]

    # callers of n now call m; n's returns migrate to all of m's exits
    # (their targets live in the callers and stay valid)
    for key_i, mod_i in modules.items():
        if key_i == key_n:
            continue
        for (q, c), callee in list(mod_i.calls.items()):
            if callee == key_n:
                mod_i.calls[(q, c)] = key_m
    for (_q, c, popped), target in list(n.returns.items()):
        for x in m.exits:
            m.returns[(x, c, popped)] = target

    # callees of n: returns popping n-states are rewritten through the pairing
    callees = {callee for (_q, _c), callee in n.calls.items()}
    for callee_key in callees:
        if callee_key == key_n:
            continue
        callee = modules[callee_key]
        for (q, c, popped), target in list(callee.returns.items()):
            if popped in n.states:
                del callee.returns[(q, c, popped)]
                callee.returns[(q, c, pairing[popped])] = pairing[target]

    del modules[key_n]


# ---------------------------------------------------------------------------
# compilation and validation

def compile_cxvpa(dxvpa: Dxvpa) -> Cxvpa:
    """Fuse every datatype choice into one minimized predicate acceptor."""
    predicates: dict[frozenset, Dfa] = {}
    int_map: dict[StateName, tuple[StateName, frozenset]] = {}
    for mod in dxvpa.modules.values():
        for src, (dst, dtset) in mod.internals.items():
            key = frozenset(dtset)
            if key not in predicates:
                members = [dxvpa.dts.datatypes[name].dfa for name in sorted(key)]
                predicates[key] = members[0] if len(members) == 1 else union_dfas(members)
            int_map[src] = (dst, key)
    return Cxvpa(dxvpa, predicates, int_map)


_BEFORE_ROOT = object()
_DONE = object()
_ROOT_MARK = object()


def validate(model: Cxvpa, stream) -> Verdict:
    """Single-pass run over a document event stream.

    Accepts any iterable of events (a validated stream or a raw sequence,
    e.g. an open-ended feed), runs the automaton with an explicit stack,
    and checks each text once against the current state's predicate.
    Failures become verdicts, never exceptions; cost is linear in event
    count plus total text length.
    """
    return _run(stream, model.root_element, model.entry0, model.finals,
                model.call_map.get, model.ret_map.get,
                lambda q, text_: _step_predicate(model, q, text_))


def _step_predicate(model: Cxvpa, q, text_):
    hit = model.int_map.get(q)
    if hit is None:
        return None
    dst, key = hit
    return dst if model.predicates[key].accepts(text_) else None


def validate_dxvpa(dxvpa: Dxvpa, stream) -> Verdict:
    """Datatype-set semantics: a text moves along the internal transition
    when some member datatype accepts it.  Equivalent to the compiled
    form; exists as the slow reference route."""
    call_map = {}
    ret_map = {}
    int_map = {}
    for mod in dxvpa.modules.values():
        for (q, c), callee in mod.calls.items():
            call_map[(q, c)] = dxvpa.modules[callee].entry
        ret_map.update(mod.returns)
        int_map.update(mod.internals)

    def step_text(q, text_):
        hit = int_map.get(q)
        if hit is None:
            return None
        dst, dtset = hit
        if any(dxvpa.dts.accepts(name, text_) for name in dtset):
            return dst
        return None

    entry0 = dxvpa.modules[dxvpa.m0].entry
    return _run(stream, dxvpa.root_element, entry0, dxvpa.finals,
                call_map.get, ret_map.get, step_text)


def _run(stream, root_element, entry0, finals, get_call, get_ret, step_text) -> Verdict:
    q = _BEFORE_ROOT
    stack = []
    index = -1
    for event in stream:
        index = event.index if event.index >= 0 else index + 1
        if q is _DONE:
            return Verdict(False, TRAILING_CONTENT, index)
        kind = event.kind
        if kind == START:
            label = event.label.render() if isinstance(event.label, QName) else str(event.label)
            if q is _BEFORE_ROOT:
                if label != root_element:
                    return Verdict(False, UNEXPECTED_ELEMENT, index, "(start)")
                stack.append(_ROOT_MARK)
                q = entry0
            else:
                target = get_call((q, label))
                if target is None:
                    return Verdict(False, UNEXPECTED_ELEMENT, index, _show(q))
                stack.append(q)
                q = target
        elif kind == END:
            label = event.label.render() if isinstance(event.label, QName) else str(event.label)
            if q is _BEFORE_ROOT or not stack:
                return Verdict(False, UNEXPECTED_END, index, _show(q))
            top = stack.pop()
            if top is _ROOT_MARK:
                if label != root_element or q not in finals:
                    return Verdict(False, UNEXPECTED_END, index, _show(q))
                q = _DONE
            else:
                target = get_ret((q, label, top))
                if target is None:
                    return Verdict(False, UNEXPECTED_END, index, _show(q))
                q = target
        elif kind == CHARS:
            if q is _BEFORE_ROOT:
                return Verdict(False, DATATYPE_MISMATCH, index, "(before root)")
            target = step_text(q, str(event.label))
            if target is None:
                return Verdict(False, DATATYPE_MISMATCH, index, _show(q))
            q = target
        else:
            return Verdict(False, UNEXPECTED_ELEMENT, index, _show(q))
    if q is _DONE and not stack:
        return ACCEPT
    return Verdict(False, PREMATURE_EOF, index, _show(q))


def _show(q) -> str:
    if q is _BEFORE_ROOT:
        return "(before root)"
    if q is _DONE:
        return "(after root)"
    ctx, sibs = q
    def fmt_ctx(c):
        if c and isinstance(c[0], tuple):
            return "#".join(" ".join(seg) for seg in c)
        return " ".join(c)
    return f"({fmt_ctx(ctx)} | {' '.join(sibs)})"


# ---------------------------------------------------------------------------
# DOT export

def to_dot(automaton, compiled: bool = False) -> str:
    """Graphviz rendering: modules as clusters, entries bold, exits double.

    Deterministic output (sorted modules, states, edges) so renderings can
    be used as golden files.
    """
    if isinstance(automaton, Cxvpa):
        raise TypeError("pass the dXVPA; use compiled=True for predicate labels")
    dxvpa = automaton
    ids = {}
    lines = ["digraph xvpa {", "  rankdir=LR;", "  node [shape=circle fontsize=10];"]
    predicates = {}
    if compiled:
        for mod in dxvpa.modules.values():
            for _src, (_dst, dtset) in mod.internals.items():
                key = frozenset(dtset)
                if key not in predicates:
                    predicates[key] = f"p{len(predicates)}"

    for mi, key in enumerate(sorted(dxvpa.modules, key=repr)):
        mod = dxvpa.modules[key]
        lines.append(f"  subgraph cluster_{mi} {{")
        star = " (start)" if key == dxvpa.m0 else ""
        lines.append(f'    label="{mod.element}{star}";')
        for q in sorted(mod.states, key=repr):
            ids[q] = f"s{len(ids)}"
            shape = "doublecircle" if q in mod.exits else "circle"
            style = ' style=bold' if q == mod.entry else ""
            label = "e" if q == mod.entry else ("x" if q in mod.exits else "q")
            lines.append(f'    {ids[q]} [shape={shape}{style} label="{label}"];')
        lines.append("  }")

    for key in sorted(dxvpa.modules, key=repr):
        mod = dxvpa.modules[key]
        for src in sorted(mod.internals, key=repr):
            dst, dtset = mod.internals[src]
            if compiled:
                label = predicates[frozenset(dtset)]
            else:
                label = ", ".join(sorted(dtset))
            lines.append(f'  {ids[src]} -> {ids[dst]} [label="{label}"];')
        for (q, c) in sorted(mod.calls, key=repr):
            callee = dxvpa.modules[mod.calls[(q, c)]]
            lines.append(f'  {ids[q]} -> {ids[callee.entry]} [label="{c}" style=dashed];')
        for (q, c, popped) in sorted(mod.returns, key=repr):
            dst = mod.returns[(q, c, popped)]
            lines.append(f'  {ids[q]} -> {ids[dst]} [label="/{c}" style=dotted];')
    lines.append("}")
    return "\n".join(lines) + "\n"
