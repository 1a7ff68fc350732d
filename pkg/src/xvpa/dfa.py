"""Regular-language machinery over Unicode codepoints.

Lexical spaces of datatypes and the text predicates of compiled validators
are plain regular languages.  This module supplies everything needed to
treat them as first-class objects: a small pattern dialect, Thompson NFA
construction, subset-construction determinization, DFA minimization,
unions, membership, exact inclusion/equality decisions with witness
strings, and random sampling of members.

Character sets are kept as sorted, disjoint, inclusive codepoint intervals
so that full Unicode classes (e.g. XML NameChar) stay tiny.

Pattern dialect
---------------
Concatenation by juxtaposition, alternation ``|``, grouping ``( )``,
postfix ``* + ? {m} {m,} {m,n}``, character classes ``[...]`` with ranges
and ``^`` negation, ``.`` for any codepoint, escapes ``\\\\ \\n \\r \\t
\\d \\u{HEX}`` plus escaped metacharacters, and a numeric-range atom
``\\num{lo,hi}`` that matches decimal digit strings (leading zeros
allowed) whose integer value lies in [lo, hi].  The range atom exists
because value-bounded types (byte, unsignedShort, ...) are regular but
painful to spell as digit alternations.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import deque

MAX_CP = 0x10FFFF

Interval = tuple[int, int]


class PatternError(ValueError):
    """Raised for syntax errors in the pattern dialect."""


# ---------------------------------------------------------------------------
# character sets: tuples of sorted, disjoint, inclusive (lo, hi) intervals

def cs_normalize(intervals) -> tuple[Interval, ...]:
    ivs = sorted((lo, hi) for lo, hi in intervals if lo <= hi)
    out: list[Interval] = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


def cs_single(ch: str) -> tuple[Interval, ...]:
    cp = ord(ch)
    return ((cp, cp),)


def cs_negate(cs) -> tuple[Interval, ...]:
    out = []
    prev = 0
    for lo, hi in cs:
        if lo > prev:
            out.append((prev, lo - 1))
        prev = hi + 1
    if prev <= MAX_CP:
        out.append((prev, MAX_CP))
    return tuple(out)


def cs_contains(cs, cp: int) -> bool:
    for lo, hi in cs:
        if lo <= cp <= hi:
            return True
        if lo > cp:
            return False
    return False


ANY_CS = ((0, MAX_CP),)
DIGIT_CS = ((ord("0"), ord("9")),)


# ---------------------------------------------------------------------------
# pattern parsing -> AST
#
# AST nodes are tuples:
#   ("set", cs) ("cat", children) ("alt", children) ("star", child)
#   ("rep", child, lo, hi_or_None) ("eps",) ("num", lo, hi)

_ESCAPES = {"n": "\n", "r": "\r", "t": "\t"}


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def error(self, msg: str):
        raise PatternError(f"{msg} at position {self.pos} in pattern {self.src!r}")

    def peek(self):
        return self.src[self.pos] if self.pos < len(self.src) else None

    def take(self):
        ch = self.peek()
        if ch is None:
            self.error("unexpected end of pattern")
        self.pos += 1
        return ch

    def parse(self):
        node = self.alt()
        if self.pos != len(self.src):
            self.error("unbalanced ')'")
        return node

    def alt(self):
        branches = [self.cat()]
        while self.peek() == "|":
            self.take()
            branches.append(self.cat())
        if len(branches) == 1:
            return branches[0]
        return ("alt", tuple(branches))

    def cat(self):
        items = []
        while True:
            ch = self.peek()
            if ch is None or ch in "|)":
                break
            items.append(self.repeat())
        if not items:
            return ("eps",)
        if len(items) == 1:
            return items[0]
        return ("cat", tuple(items))

    def repeat(self):
        node = self.atom()
        while True:
            ch = self.peek()
            if ch == "*":
                self.take()
                node = ("star", node)
            elif ch == "+":
                self.take()
                node = ("cat", (node, ("star", node)))
            elif ch == "?":
                self.take()
                node = ("alt", (node, ("eps",)))
            elif ch == "{":
                node = self.bounds(node)
            else:
                return node

    def bounds(self, node):
        self.take()  # '{'
        lo = self.int_until(",}")
        if self.peek() == "}":
            self.take()
            return ("rep", node, lo, lo)
        self.take()  # ','
        if self.peek() == "}":
            self.take()
            return ("rep", node, lo, None)
        hi = self.int_until("}")
        self.take()
        if hi < lo:
            self.error("bad repetition bounds")
        return ("rep", node, lo, hi)

    def int_until(self, stops: str) -> int:
        digits = ""
        while self.peek() is not None and self.peek() not in stops:
            digits += self.take()
        if not digits.isdigit():
            self.error("expected integer in repetition")
        return int(digits)

    def atom(self):
        ch = self.take()
        if ch == "(":
            node = self.alt()
            if self.peek() != ")":
                self.error("missing ')'")
            self.take()
            return node
        if ch == "[":
            return ("set", self.char_class())
        if ch == ".":
            return ("set", ANY_CS)
        if ch == "\\":
            return self.escape()
        if ch in "*+?{":
            self.error(f"dangling quantifier {ch!r}")
        return ("set", cs_single(ch))

    def escape(self):
        ch = self.take()
        if ch == "d":
            return ("set", DIGIT_CS)
        if ch == "u":
            cp = self.codepoint()
            return ("set", ((cp, cp),))
        if ch in _ESCAPES:
            return ("set", cs_single(_ESCAPES[ch]))
        return ("set", cs_single(ch))

    def codepoint(self) -> int:
        if self.take() != "{":
            self.error(r"expected '{' after \u")
        digits = ""
        while self.peek() != "}":
            digits += self.take()
        self.take()
        try:
            cp = int(digits, 16)
        except ValueError:
            self.error(r"bad \u{...} escape")
        if not 0 <= cp <= MAX_CP:
            self.error("codepoint out of range")
        return cp

    def class_escape(self) -> int | tuple[Interval, ...]:
        ch = self.take()
        if ch == "d":
            return DIGIT_CS
        if ch == "u":
            return self.codepoint()
        if ch in _ESCAPES:
            return ord(_ESCAPES[ch])
        return ord(ch)

    def char_class(self) -> tuple[Interval, ...]:
        negate = False
        if self.peek() == "^":
            self.take()
            negate = True
        intervals: list[Interval] = []
        pending: int | None = None  # candidate range start

        def flush():
            nonlocal pending
            if pending is not None:
                intervals.append((pending, pending))
                pending = None

        while True:
            ch = self.peek()
            if ch is None:
                self.error("unterminated character class")
            if ch == "]":
                self.take()
                flush()
                break
            if ch == "\\":
                self.take()
                item = self.class_escape()
                if isinstance(item, tuple):
                    flush()
                    intervals.extend(item)
                    continue
                flush()
                pending = item  # escaped char is always literal
                continue
            cp = ord(self.take())
            # only a raw dash between two members forms a range
            if cp == ord("-") and pending is not None and self.peek() not in (None, "]"):
                lo = pending
                pending = None
                if self.peek() == "\\":
                    self.take()
                    item = self.class_escape()
                    if isinstance(item, tuple):
                        self.error("class shorthand cannot end a range")
                    hi = item
                else:
                    hi = ord(self.take())
                if hi < lo:
                    self.error("reversed range in character class")
                intervals.append((lo, hi))
                continue
            flush()
            pending = cp
        cs = cs_normalize(intervals)
        return cs_negate(cs) if negate else cs


def parse_pattern(src: str):
    r"""Parse a pattern into an AST, handling the \num{lo,hi} atom."""
    # \num{...} is lexically awkward inside the char-by-char parser, so it
    # is replaced with a placeholder character from a private-use plane and
    # restored during NFA construction.
    ranges = []
    out = []
    i = 0
    while i < len(src):
        if src.startswith(r"\num{", i):
            j = src.index("}", i)
            body = src[i + 5:j]
            try:
                lo_s, hi_s = body.split(",")
                lo, hi = int(lo_s), int(hi_s)
            except ValueError:
                raise PatternError(f"bad \\num atom in {src!r}") from None
            if lo < 0 or hi < lo:
                raise PatternError(f"bad \\num bounds in {src!r}")
            placeholder = chr(0xF0000 + len(ranges))
            ranges.append((lo, hi))
            out.append(placeholder)
            i = j + 1
        else:
            if src[i] == "\\" and i + 1 < len(src):
                out.append(src[i:i + 2])
                i += 2
            else:
                out.append(src[i])
                i += 1
    ast = _Parser("".join(out)).parse()

    def restore(node):
        kind = node[0]
        if kind == "set":
            cs = node[1]
            if len(cs) == 1 and cs[0][0] == cs[0][1] and 0xF0000 <= cs[0][0] < 0xF0000 + len(ranges):
                lo, hi = ranges[cs[0][0] - 0xF0000]
                return ("num", lo, hi)
            return node
        if kind in ("cat", "alt"):
            return (kind, tuple(restore(c) for c in node[1]))
        if kind == "star":
            return ("star", restore(node[1]))
        if kind == "rep":
            return ("rep", restore(node[1]), node[2], node[3])
        return node

    return restore(ast) if ranges else ast


# ---------------------------------------------------------------------------
# NFA with epsilon transitions

class _Nfa:
    def __init__(self):
        self.eps: list[set[int]] = []
        self.edges: list[list[tuple[tuple[Interval, ...], int]]] = []

    def new_state(self) -> int:
        self.eps.append(set())
        self.edges.append([])
        return len(self.eps) - 1

    def add_edge(self, src: int, cs, dst: int):
        self.edges[src].append((cs, dst))

    def add_eps(self, src: int, dst: int):
        self.eps[src].add(dst)

    def fragment(self, node) -> tuple[int, int]:
        kind = node[0]
        if kind == "eps":
            s = self.new_state()
            return s, s
        if kind == "set":
            s, t = self.new_state(), self.new_state()
            self.add_edge(s, node[1], t)
            return s, t
        if kind == "cat":
            first, last = None, None
            for child in node[1]:
                cs, ct = self.fragment(child)
                if first is None:
                    first = cs
                else:
                    self.add_eps(last, cs)
                last = ct
            return first, last
        if kind == "alt":
            s, t = self.new_state(), self.new_state()
            for child in node[1]:
                cs, ct = self.fragment(child)
                self.add_eps(s, cs)
                self.add_eps(ct, t)
            return s, t
        if kind == "star":
            s, t = self.new_state(), self.new_state()
            cs, ct = self.fragment(node[1])
            self.add_eps(s, cs)
            self.add_eps(ct, cs)
            self.add_eps(s, t)
            self.add_eps(ct, t)
            return s, t
        if kind == "rep":
            _, child, lo, hi = node
            parts = []
            for _ in range(lo):
                parts.append(child)
            if hi is None:
                parts.append(("star", child))
            else:
                for _ in range(hi - lo):
                    parts.append(("alt", (child, ("eps",))))
            if not parts:
                return self.fragment(("eps",))
            return self.fragment(("cat", tuple(parts)))
        if kind == "num":
            return self._num_fragment(node[1], node[2])
        raise AssertionError(f"unknown AST node {kind}")

    def _num_fragment(self, lo: int, hi: int) -> tuple[int, int]:
        table, start_key, accepting = _num_range_table(lo, hi)
        ids = {key: self.new_state() for key in table}
        accept = self.new_state()
        for key, moves in table.items():
            for digit, target in moves.items():
                cp = ord("0") + digit
                self.add_edge(ids[key], ((cp, cp),), ids[target])
        for key in accepting:
            self.add_eps(ids[key], accept)
        return ids[start_key], accept


def _num_range_table(lo: int, hi: int):
    """Digit automaton for decimal strings with value in [lo, hi].

    Leading zeros are allowed.  States track the length of the significant
    part (after zeros) and its lexicographic relation to both bounds.
    """
    los, his = str(lo), str(hi)

    def step(key, digit):
        if key in ("S", "Z"):
            if digit == 0:
                return "Z"
            m = 1
            rl = _cmp(digit, int(los[0])) if len(los) >= 1 else "gt"
            rh = _cmp(digit, int(his[0]))
            return ("sig", m, rl, rh)
        _, m, rl, rh = key
        m2 = m + 1
        if m2 > len(his):
            return None  # value exceeds hi, no recovery
        if m2 > len(los):
            rl2 = "gt"
        elif rl != "eq":
            rl2 = rl
        else:
            rl2 = _cmp(digit, int(los[m2 - 1]))
        rh2 = rh if rh != "eq" else _cmp(digit, int(his[m2 - 1]))
        return ("sig", m2, rl2, rh2)

    def accepts(key):
        if key == "S":
            return False
        if key == "Z":
            return lo == 0
        _, m, rl, rh = key
        ge_lo = m > len(los) or (m == len(los) and rl in ("eq", "gt"))
        le_hi = m < len(his) or (m == len(his) and rh in ("lt", "eq"))
        return ge_lo and le_hi

    table: dict = {}
    work = deque(["S"])
    seen = {"S"}
    while work:
        key = work.popleft()
        moves = {}
        for digit in range(10):
            nxt = step(key, digit)
            if nxt is None:
                continue
            moves[digit] = nxt
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
        table[key] = moves
    accepting = {key for key in table if accepts(key)}
    return table, "S", accepting


def _cmp(a: int, b: int) -> str:
    return "lt" if a < b else ("eq" if a == b else "gt")


# ---------------------------------------------------------------------------
# DFA

class Dfa:
    """Deterministic, partial automaton over codepoint intervals.

    Transitions per state are parallel sorted arrays (los, his, targets);
    a codepoint with no covering interval rejects immediately.  Instances
    are immutable once built and safe to share between threads.
    """

    __slots__ = ("n", "start", "accepting", "_los", "_his", "_dst")

    def __init__(self, n, start, accepting, tables):
        self.n = n
        self.start = start
        self.accepting = frozenset(accepting)
        self._los = []
        self._his = []
        self._dst = []
        for rows in tables:
            rows = sorted(rows)
            self._los.append([r[0] for r in rows])
            self._his.append([r[1] for r in rows])
            self._dst.append([r[2] for r in rows])

    # -- membership ---------------------------------------------------------

    def step(self, state: int, cp: int) -> int | None:
        los = self._los[state]
        i = bisect_right(los, cp) - 1
        if i >= 0 and cp <= self._his[state][i]:
            return self._dst[state][i]
        return None

    def accepts(self, text: str) -> bool:
        state = self.start
        step = self.step
        for ch in text:
            state = step(state, ord(ch))
            if state is None:
                return False
        return state in self.accepting

    def edges(self, state: int):
        for lo, hi, dst in zip(self._los[state], self._his[state], self._dst[state]):
            yield lo, hi, dst

    @property
    def is_empty(self) -> bool:
        return not self.accepting

    # -- construction -------------------------------------------------------

    @classmethod
    def from_pattern(cls, pattern: str) -> "Dfa":
        nfa = _Nfa()
        start, accept = nfa.fragment(parse_pattern(pattern))
        return cls.from_nfa(nfa, start, {accept}).minimized()

    @classmethod
    def from_nfa(cls, nfa: _Nfa, start: int, accepts: set[int]) -> "Dfa":
        def closure(states: frozenset[int]) -> frozenset[int]:
            seen = set(states)
            work = list(states)
            while work:
                s = work.pop()
                for t in nfa.eps[s]:
                    if t not in seen:
                        seen.add(t)
                        work.append(t)
            return frozenset(seen)

        start_set = closure(frozenset([start]))
        index = {start_set: 0}
        tables: list[list[tuple[int, int, int]]] = [[]]
        accepting = set()
        if start_set & accepts:
            accepting.add(0)
        work = deque([start_set])
        while work:
            cur = work.popleft()
            cur_id = index[cur]
            edges = []
            for s in cur:
                edges.extend(nfa.edges[s])
            rows = []
            for lo, hi in _atomic_intervals(edges):
                targets = set()
                for cs, dst in edges:
                    for elo, ehi in cs:
                        if elo <= lo and hi <= ehi:
                            targets.add(dst)
                            break
                if not targets:
                    continue
                tgt = closure(frozenset(targets))
                if tgt not in index:
                    index[tgt] = len(tables)
                    tables.append([])
                    if tgt & accepts:
                        accepting.add(index[tgt])
                    work.append(tgt)
                rows.append((lo, hi, index[tgt]))
            tables[cur_id] = _merge_rows(rows)
        return cls(len(tables), 0, accepting, tables)

    # -- transformations ----------------------------------------------------

    def minimized(self) -> "Dfa":
        live = self._coaccessible()
        if self.start not in live:
            return Dfa(1, 0, set(), [[]])
        # Moore partition refinement over full-range signatures.
        block = {s: (1 if s in self.accepting else 0) for s in live}
        while True:
            signatures = {}
            for s in live:
                sig = [block[s]]
                prev = 0
                for lo, hi, dst in self.edges(s):
                    if dst not in live:
                        continue
                    if lo > prev:
                        sig.append((prev, lo - 1, -1))
                    sig.append((lo, hi, block[dst]))
                    prev = hi + 1
                if prev <= MAX_CP:
                    sig.append((prev, MAX_CP, -1))
                signatures[s] = tuple(_merge_sig(sig))
            new_ids = {}
            new_block = {}
            for s in sorted(live):
                key = signatures[s]
                if key not in new_ids:
                    new_ids[key] = len(new_ids)
                new_block[s] = new_ids[key]
            if len(set(new_block.values())) == len(set(block.values())):
                block = new_block
                break
            block = new_block
        # rebuild with BFS numbering from the start block
        rep_edges: dict[int, list[tuple[int, int, int]]] = {}
        block_accepting = set()
        for s in live:
            b = block[s]
            if b in rep_edges:
                continue
            rows = [(lo, hi, block[dst]) for lo, hi, dst in self.edges(s) if dst in live]
            rep_edges[b] = _merge_rows(rows)
            if s in self.accepting:
                block_accepting.add(b)
        order = {}
        queue = deque([block[self.start]])
        order[block[self.start]] = 0
        while queue:
            b = queue.popleft()
            for _, _, dst in rep_edges[b]:
                if dst not in order:
                    order[dst] = len(order)
                    queue.append(dst)
        tables = [[] for _ in order]
        accepting = set()
        for b, rows in rep_edges.items():
            if b not in order:
                continue
            tables[order[b]] = [(lo, hi, order[dst]) for lo, hi, dst in rows if dst in order]
            if b in block_accepting:
                accepting.add(order[b])
        return Dfa(len(tables), 0, accepting, tables)

    def _coaccessible(self) -> set[int]:
        incoming: dict[int, set[int]] = {s: set() for s in range(self.n)}
        for s in range(self.n):
            for _, _, dst in self.edges(s):
                incoming[dst].add(s)
        live = set(self.accepting)
        work = list(live)
        while work:
            s = work.pop()
            for p in incoming[s]:
                if p not in live:
                    live.add(p)
                    work.append(p)
        # keep only states also reachable from start
        reach = {self.start}
        work = [self.start]
        while work:
            s = work.pop()
            for _, _, dst in self.edges(s):
                if dst not in reach:
                    reach.add(dst)
                    work.append(dst)
        return live & reach


def _merge_rows(rows):
    rows = sorted(rows)
    merged = []
    for lo, hi, dst in rows:
        if merged and merged[-1][2] == dst and merged[-1][1] + 1 == lo:
            merged[-1] = (merged[-1][0], hi, dst)
        else:
            merged.append((lo, hi, dst))
    return merged


def _merge_sig(sig):
    head, rows = sig[0], sig[1:]
    merged = [head]
    for lo, hi, b in rows:
        if len(merged) > 1 and merged[-1][2] == b and merged[-1][1] + 1 == lo:
            merged[-1] = (merged[-1][0], hi, b)
        else:
            merged.append((lo, hi, b))
    return merged


def _atomic_intervals(edges):
    points = set()
    for cs, _ in edges:
        for lo, hi in cs:
            points.add(lo)
            points.add(hi + 1)
    bounds = sorted(points)
    return [(bounds[i], bounds[i + 1] - 1) for i in range(len(bounds) - 1)]


def union_dfas(dfas) -> Dfa:
    """Language union as a single minimized DFA."""
    nfa = _Nfa()
    start = nfa.new_state()
    accepts = set()
    for d in dfas:
        offset = len(nfa.eps)
        for _ in range(d.n):
            nfa.new_state()
        nfa.add_eps(start, offset + d.start)
        for s in range(d.n):
            for lo, hi, dst in d.edges(s):
                nfa.add_edge(offset + s, ((lo, hi),), offset + dst)
            if s in d.accepting:
                accepts.add(offset + s)
    return Dfa.from_nfa(nfa, start, accepts).minimized()


# ---------------------------------------------------------------------------
# language queries on DFA pairs

def _product_witness(a: Dfa, b: Dfa, want) -> str | None:
    """BFS the product automaton; return the first string whose pair of
    acceptance flags satisfies ``want(acc_a, acc_b)``.  Missing transitions
    are modelled as a dead (non-accepting, absorbing) state ``None``."""

    def acc(d: Dfa, s):
        return s is not None and s in d.accepting

    start = (a.start, b.start)
    if want(acc(a, start[0]), acc(b, start[1])):
        return ""
    seen = {start}
    queue = deque([(start, "")])
    while queue:
        (sa, sb), prefix = queue.popleft()
        edges = []
        if sa is not None:
            edges.extend((lo, hi) for lo, hi, _ in a.edges(sa))
        if sb is not None:
            edges.extend((lo, hi) for lo, hi, _ in b.edges(sb))
        if not edges:
            continue
        for lo, hi in _atomic_intervals([(((l, h),), 0) for l, h in edges]):
            ta = a.step(sa, lo) if sa is not None else None
            tb = b.step(sb, lo) if sb is not None else None
            if (ta, tb) in seen:
                continue
            seen.add((ta, tb))
            cp = _readable_cp(lo, hi)
            if want(acc(a, ta), acc(b, tb)):
                return prefix + chr(cp)
            queue.append(((ta, tb), prefix + chr(cp)))
    return None


def _readable_cp(lo: int, hi: int) -> int:
    for probe in (0x61, 0x30, 0x20):  # 'a', '0', space
        if lo <= probe <= hi:
            return probe
    return lo


def subset_counterexample(a: Dfa, b: Dfa) -> str | None:
    """A string in L(a) but not L(b), or None if L(a) is a subset of L(b)."""
    return _product_witness(a, b, lambda x, y: x and not y)


def distinguishing_string(a: Dfa, b: Dfa) -> str | None:
    """A string in exactly one of the two languages, or None if equal."""
    return _product_witness(a, b, lambda x, y: x != y)


def sample_string(dfa: Dfa, rng, max_len: int = 40) -> str:
    """Draw a random member of L(dfa).  Raises ValueError on the empty
    language.  The walk stops at accepting states with growing probability
    and falls back to a shortest path to acceptance near max_len."""
    if dfa.is_empty:
        raise ValueError("cannot sample from an empty language")
    dist = _distance_to_accept(dfa)
    out = []
    state = dfa.start
    while True:
        if state in dfa.accepting and (len(out) >= max_len or rng.random() < 0.35):
            return "".join(out)
        rows = list(dfa.edges(state))
        if not rows:
            return "".join(out)  # accepting by co-accessibility
        if len(out) >= max_len:
            rows = [r for r in rows if dist[r[2]] == dist[state] - 1] or rows
        lo, hi, dst = rng.choice(rows)
        out.append(chr(_pick_cp(lo, hi, rng)))
        state = dst


def _pick_cp(lo: int, hi: int, rng) -> int:
    # bias toward printable ASCII when the interval allows it
    plo, phi = max(lo, 0x20), min(hi, 0x7E)
    if plo <= phi:
        return rng.randint(plo, phi)
    return rng.randint(lo, hi)


def _distance_to_accept(dfa: Dfa) -> dict[int, int]:
    incoming: dict[int, list[int]] = {s: [] for s in range(dfa.n)}
    for s in range(dfa.n):
        for _, _, dst in dfa.edges(s):
            incoming[dst].append(s)
    dist = {s: 0 for s in dfa.accepting}
    queue = deque(dfa.accepting)
    while queue:
        s = queue.popleft()
        for p in incoming[s]:
            if p not in dist:
                dist[p] = dist[s] + 1
                queue.append(p)
    return dist
