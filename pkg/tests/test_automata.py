"""dXVPA generation, module folding, predicate compilation, validation."""

import random

import pytest

from xvpa import events as ev
from xvpa.automata import (DATATYPE_MISMATCH, PREMATURE_EOF, TRAILING_CONTENT,
                           UNEXPECTED_ELEMENT, UNEXPECTED_END,
                           AutomatonStructureError, EmptyLanguageError,
                           build_xvpa, compile_cxvpa, to_dot, validate,
                           validate_dxvpa)
from xvpa.harness import cardealer_grammar, generate
from xvpa.learner import Learner, NamingScheme

from .oracles import enumerate_streams
from .samplers import sample

A11 = NamingScheme("ancestor", 1, 1)
A12 = NamingScheme("ancestor", 1, 2)


def learn_corpus(dts, scheme, docs):
    learner = Learner(dts, scheme)
    for d in docs:
        learner.learn(d)
    return learner


@pytest.fixture(scope="module")
def cardealer(dts, master_seed):
    docs = generate(cardealer_grammar(), 50, master_seed)
    learner = learn_corpus(dts, A12, docs)
    dxvpa = build_xvpa(learner.snapshot(), dts)
    return docs, dxvpa, compile_cxvpa(dxvpa)


# -- generation ----------------------------------------------------------------

def test_cardealer_golden_modules(cardealer):
    _docs, dxvpa, _cx = cardealer
    module_names = sorted(" ".join(key) for key in dxvpa.modules)
    assert module_names == ["ad model", "ad year", "dealer", "dealer newcars",
                            "dealer usedcars", "newcars ad", "usedcars ad"]
    assert len(dxvpa.modules) == 7
    assert dxvpa.root_element == "dealer"
    assert dxvpa.m0 == ("dealer",)
    # the model module is shared: called from both ad modules
    callers = {key for key, mod in dxvpa.modules.items()
               for (_q, c), callee in mod.calls.items() if callee == ("ad", "model")}
    assert callers == {("newcars", "ad"), ("usedcars", "ad")}


def test_cardealer_year_datatype_choice(cardealer):
    _docs, dxvpa, _cx = cardealer
    year = dxvpa.modules[("ad", "year")]
    (dtset,) = {frozenset(dts) for _dst, dts in year.internals.values()}
    assert dtset == {"gYear", "gYearMonth"}


def test_single_element_module(dts):
    learner = learn_corpus(dts, A11, [ev.parse_document(b"<a/>")])
    dxvpa = build_xvpa(learner.snapshot(), dts)
    assert len(dxvpa.modules) == 1
    mod = dxvpa.modules[("a",)]
    assert mod.entry in mod.exits
    cx = compile_cxvpa(dxvpa)
    assert validate(cx, ev.parse_document(b"<a/>")).accepted
    assert not validate(cx, ev.parse_document(b"<a><b/></a>")).accepted


def test_empty_language_raises(dts):
    learner = Learner(dts, A11)
    with pytest.raises(EmptyLanguageError):
        build_xvpa(learner.snapshot(), dts)


def test_multiple_roots_rejected(dts):
    learner = learn_corpus(dts, A11, [ev.parse_document(b"<a/>"), ev.parse_document(b"<b/>")])
    with pytest.raises(AutomatonStructureError):
        build_xvpa(learner.snapshot(), dts)


def test_structural_invariants_hold(cardealer, dts):
    _docs, dxvpa, _cx = cardealer
    # re-runs the constructor checks (single exit, mixed content)
    type(dxvpa)(dxvpa.modules, dxvpa.m0, dxvpa.root_element, dts)
    for mod in dxvpa.modules.values():
        internal_successors = {dst for dst, _ in mod.internals.values()}
        for src, (dst, _dts) in mod.internals.items():
            assert dst in mod.states and src in mod.states
        for other in dxvpa.modules.values():
            for (_q, _c, _p), target in other.returns.items():
                assert target not in internal_successors


# -- minimization ----------------------------------------------------------------

def test_minimize_folds_equivalent_modules(dts, master_seed):
    docs = generate(cardealer_grammar(), 40, master_seed + 7)
    learner = learn_corpus(dts, NamingScheme("ancestor", 1, 3), docs)
    raw = build_xvpa(learner.snapshot(), dts, minimize_modules=False)
    folded = build_xvpa(learner.snapshot(), dts)
    assert len(raw.modules) == 8   # two structurally equal model modules
    assert len(folded.modules) == 7
    cx = compile_cxvpa(folded)
    for d in docs:
        assert validate(cx, d).accepted


def test_minimize_ancestor_sibling_scheme(dts, master_seed):
    docs = generate(cardealer_grammar(), 40, master_seed + 8)
    learner = learn_corpus(dts, NamingScheme("ancestor-sibling", 1, 2), docs)
    raw = build_xvpa(learner.snapshot(), dts, minimize_modules=False)
    folded = build_xvpa(learner.snapshot(), dts)
    assert len(raw.modules) - len(folded.modules) == 1
    cx = compile_cxvpa(folded)
    for d in docs:
        assert validate(cx, d).accepted


def test_minimize_rewrites_shared_callee_returns(dts):
    """Folding modules that call into a shared submodule must redirect the
    submodule's returns through the state pairing."""
    doc = ev.parse_document(
        b"<root><p><a><b>5</b></a></p><q><a><b>7</b></a></q></root>")
    learner = learn_corpus(dts, A12, [doc])
    raw = build_xvpa(learner.snapshot(), dts, minimize_modules=False)
    folded = build_xvpa(learner.snapshot(), dts)
    assert len(raw.modules) == 6 and len(folded.modules) == 5
    assert ("q", "a") not in folded.modules
    cx = compile_cxvpa(folded)
    assert validate(cx, doc).accepted
    assert validate(cx, ev.parse_document(
        b"<root><p><a><b>1</b></a></p><q><a><b>0</b></a></q></root>")).accepted
    assert not validate(cx, ev.parse_document(
        b"<root><p><a><b>5</b></a></p></root>")).accepted
    assert not validate(cx, ev.parse_document(
        b"<root><p><a><b>x</b></a></p><q><a><b>7</b></a></q></root>")).accepted


def test_minimize_cascades_over_module_triples(dts):
    doc = ev.parse_document(
        b"<root><x><leaf>5</leaf></x><y><leaf>7</leaf></y><z><leaf>9</leaf></z></root>")
    learner = learn_corpus(dts, A12, [doc])
    raw = build_xvpa(learner.snapshot(), dts, minimize_modules=False)
    folded = build_xvpa(learner.snapshot(), dts)
    assert len(raw.modules) == 7 and len(folded.modules) == 5  # two folds
    assert validate(compile_cxvpa(folded), doc).accepted


def test_minimize_is_fixed_point_on_minimal_automata(cardealer, dts):
    _docs, dxvpa, _cx = cardealer
    from xvpa.automata import minimize
    again = minimize(dxvpa)
    assert set(again.modules) == set(dxvpa.modules)
    for key in dxvpa.modules:
        assert again.modules[key].returns == dxvpa.modules[key].returns
        assert again.modules[key].calls == dxvpa.modules[key].calls


def test_minimize_preserves_language(dts, master_seed):
    docs = generate(cardealer_grammar(), 30, master_seed + 9)
    learner = learn_corpus(dts, NamingScheme("ancestor", 1, 3), docs)
    raw = build_xvpa(learner.snapshot(), dts, minimize_modules=False)
    folded = build_xvpa(learner.snapshot(), dts)
    cx_raw = compile_cxvpa(raw)
    cx_folded = compile_cxvpa(folded)
    probes = list(docs)
    probes += generate(cardealer_grammar(), 30, master_seed + 10)
    probes += [
        ev.parse_document(b"<dealer><newcars/><usedcars/></dealer>"),
        ev.parse_document(b"<dealer><usedcars/><newcars/></dealer>"),
        ev.parse_document(b"<dealer><newcars><ad><model>M</model>"
                          b"<year>2001Z</year></ad></newcars><usedcars/></dealer>"),
    ]
    for stream in probes:
        assert validate(cx_raw, stream).accepted == validate(cx_folded, stream).accepted


# -- compilation ----------------------------------------------------------------

def test_year_predicate_accepts_both_members(cardealer, dts):
    _docs, _dx, cx = cardealer
    key = frozenset({"gYear", "gYearMonth"})
    predicate = cx.predicates[key]
    for text in ("2015", "0999", "2015Z", "2015-09", "1999-01Z", "-2015"):
        assert predicate.accepts(text), text
    for text in ("20x5", "2015-13", "15", "", "x"):
        assert not predicate.accepts(text), text


def test_single_datatype_predicate_equals_member(dts):
    learner = learn_corpus(dts, A11, [ev.parse_document(b"<m>false</m>")])
    cx = compile_cxvpa(build_xvpa(learner.snapshot(), dts))
    (key,) = cx.predicates
    assert key == frozenset({"boolean"})
    from xvpa.dfa import distinguishing_string
    assert distinguishing_string(cx.predicates[key], dts.datatypes["boolean"].dfa) is None


def test_predicate_membership_cross_check(cardealer, dts, master_seed):
    """1000 random strings: predicate acceptance iff acceptance by at
    least one member datatype."""
    _docs, _dx, cx = cardealer
    rng = random.Random(master_seed + 11)
    pool = sorted(dts.names())
    for key, predicate in cx.predicates.items():
        for _ in range(1000 // max(1, len(cx.predicates))):
            name = rng.choice(pool)
            text = sample(name, rng)
            expected = any(dts.accepts(member, text) for member in key)
            assert predicate.accepts(text) == expected, (key, text)


# -- validation ----------------------------------------------------------------

def test_validate_used_ad_with_plain_year(cardealer):
    _docs, _dx, cx = cardealer
    good = ev.parse_document(
        b"<dealer><newcars/><usedcars><ad><model>Astra</model>"
        b"<year>2015</year></ad></usedcars></dealer>")
    assert validate(cx, good).accepted


def test_validate_datatype_mismatch(cardealer):
    _docs, _dx, cx = cardealer
    bad = ev.parse_document(
        b"<dealer><newcars/><usedcars><ad><model>Astra</model>"
        b"<year>20x5</year></ad></usedcars></dealer>")
    verdict = validate(cx, bad)
    assert not verdict.accepted
    assert verdict.reason == DATATYPE_MISMATCH
    assert bad.events[verdict.event_index].kind == ev.CHARS


def test_validate_unexpected_element(cardealer):
    _docs, _dx, cx = cardealer
    bad = ev.parse_document(b"<dealer><surprise/><newcars/><usedcars/></dealer>")
    verdict = validate(cx, bad)
    assert verdict.reason == UNEXPECTED_ELEMENT and verdict.event_index == 1


def test_validate_wrong_root(cardealer):
    _docs, _dx, cx = cardealer
    verdict = validate(cx, ev.parse_document(b"<garage/>"))
    assert verdict.reason == UNEXPECTED_ELEMENT and verdict.event_index == 0


def test_validate_raw_event_sequences(cardealer):
    _docs, _dx, cx = cardealer
    # unclosed document: premature end of stream
    partial = [ev.start("dealer"), ev.start("newcars")]
    assert validate(cx, partial).reason == PREMATURE_EOF
    # events after the root closes
    trailing = [ev.start("dealer"), ev.start("newcars"), ev.end("newcars"),
                ev.start("usedcars"), ev.end("usedcars"), ev.end("dealer"),
                ev.start("dealer")]
    assert validate(cx, trailing).reason == TRAILING_CONTENT
    # an end with no matching open
    stray = [ev.start("dealer"), ev.start("newcars"), ev.end("dealer")]
    assert validate(cx, stray).reason == UNEXPECTED_END


def test_validate_is_deterministic(cardealer):
    docs, _dx, cx = cardealer
    for d in docs[:10]:
        assert validate(cx, d) == validate(cx, d)


def test_dxvpa_route_agrees_on_corpus(cardealer):
    docs, dx, cx = cardealer
    for d in docs:
        assert validate_dxvpa(dx, d).accepted == validate(cx, d).accepted


def test_equivalence_on_small_stream_enumeration(dts):
    """Exhaustive depth<=2/width<=2 streams: datatype-set semantics and
    predicate semantics agree everywhere (the acceptance suite runs the
    full depth-3/width-3 enumeration)."""
    train = [
        ev.parse_document(b"<a><b>5</b></a>"),
        ev.parse_document(b"<a><b>false</b><b>7</b>tail x</a>"),
        ev.parse_document(b"<a/>"),
    ]
    learner = learn_corpus(dts, A11, train)
    dx = build_xvpa(learner.snapshot(), dts)
    cx = compile_cxvpa(dx)
    texts = ["5", "false", "x y", "##"]
    count = accepted = 0
    for stream in enumerate_streams(["a", "b"], texts, depth=2, width=2):
        left = validate_dxvpa(dx, stream).accepted
        right = validate(cx, stream).accepted
        assert left == right, stream.debug_lines()
        count += 1
        accepted += left
    assert count >= 40 and 0 < accepted < count


def test_validator_total_over_random_event_sequences(cardealer, master_seed):
    """Arbitrary raw event sequences always produce a verdict."""
    import random
    _docs, _dx, cx = cardealer
    rng = random.Random(master_seed + 61)
    makers = [lambda r: ev.start(r.choice(["dealer", "ad", "x"])),
              lambda r: ev.end(r.choice(["dealer", "ad", "x"])),
              lambda r: ev.text(r.choice(["5", "", "1999Z"]))]
    for _ in range(1500):
        events = [rng.choice(makers)(rng) for _ in range(rng.randint(0, 12))]
        verdict = validate(cx, events)
        assert isinstance(verdict.accepted, bool)
        if not verdict.accepted:
            assert verdict.reason is not None


def test_validator_is_reentrant_across_threads(cardealer):
    import threading
    docs, _dx, cx = cardealer
    errors = []

    def worker():
        try:
            for d in docs[:20]:
                assert validate(cx, d).accepted
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors


# -- DOT export ----------------------------------------------------------------

def test_dot_export_structure(cardealer):
    _docs, dx, _cx = cardealer
    dot = to_dot(dx)
    assert dot.startswith("digraph xvpa {")
    assert dot.count("subgraph cluster_") == 7
    assert 'label="dealer (start)"' in dot
    assert 'label="gYear, gYearMonth"' in dot
    assert to_dot(dx) == dot  # deterministic
    compiled = to_dot(dx, compiled=True)
    assert 'label="p0"' in compiled


def test_dot_golden_small(dts):
    learner = learn_corpus(dts, A11, [ev.parse_document(b"<m>false</m>")])
    dot = to_dot(build_xvpa(learner.snapshot(), dts))
    assert dot == (
        'digraph xvpa {\n'
        '  rankdir=LR;\n'
        '  node [shape=circle fontsize=10];\n'
        '  subgraph cluster_0 {\n'
        '    label="m (start)";\n'
        '    s0 [shape=doublecircle label="x"];\n'
        '    s1 [shape=circle style=bold label="e"];\n'
        '  }\n'
        '  s1 -> s0 [label="boolean"];\n'
        '}\n'
    )
