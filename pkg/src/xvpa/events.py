"""Document event streams: the canonical linearization of XML documents.

A document becomes a flat sequence of start-element, end-element, and
characters events.  Processing instructions, comments, and entity-reference
nodes are dropped, CDATA sections are unwrapped, namespace prefixes are
erased (qualified names compare by namespace URI and local name), and
attributes are expanded into alphabetically sorted pseudo-element triples
``start(@name), characters(value), end(@name)``.

Whitespace-only character runs between element tags are discarded before
coalescing; surviving adjacent text becomes a single characters event, so a
stream never contains two consecutive characters events.

Streams are immutable and safe to share across threads; distinct documents
may be parsed concurrently.
"""

from __future__ import annotations

import xml.parsers.expat
from dataclasses import dataclass, field

START = "start"
END = "end"
CHARS = "chars"

_WS = set(" \t\r\n")


class MalformedXmlError(ValueError):
    """Input is not a well-formed (namespace-well-formed) XML document."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class DoctypeRejectedError(MalformedXmlError):
    """Inline DOCTYPE declarations are refused outright: entity expansion
    and external references are a parsing-attack class, not content."""


class EncodingError(MalformedXmlError):
    """Only UTF-8 input is accepted."""


class InvariantViolation(ValueError):
    """A synthesized event sequence breaks a stream invariant."""

    def __init__(self, invariant, index, message=""):
        self.invariant = invariant
        self.index = index
        super().__init__(f"{invariant} at event {index}" + (f": {message}" if message else ""))


@dataclass(frozen=True, order=True)
class QName:
    """Qualified name: namespace URI (may be empty) plus local name.

    Attribute-derived names carry the ``@`` marker via ``is_attr`` and
    render with a leading ``@``.
    """

    ns: str
    local: str
    is_attr: bool = False

    def render(self) -> str:
        base = "{%s}%s" % (self.ns, self.local) if self.ns else self.local
        return "@" + base if self.is_attr else base


def parse_rendered_name(text: str) -> QName:
    """Inverse of :meth:`QName.render`."""
    is_attr = text.startswith("@")
    if is_attr:
        text = text[1:]
    if text.startswith("{"):
        ns, _, local = text[1:].partition("}")
        return QName(ns, local, is_attr)
    return QName("", text, is_attr)


@dataclass(frozen=True)
class Event:
    """One stream event.  ``label`` is a QName for start/end events, the
    text for characters events (or an inferred datatype set after the
    datatyped mapping).  ``index`` is the position in the stream; -1 marks
    an event not yet placed in a stream."""

    kind: str
    label: object
    index: int = -1


def start(name, ns="", is_attr=False) -> Event:
    return Event(START, QName(ns, name, is_attr))


def end(name, ns="", is_attr=False) -> Event:
    return Event(END, QName(ns, name, is_attr))


def text(value: str) -> Event:
    return Event(CHARS, value)


@dataclass(frozen=True)
class DocumentEventStream:
    """A validated, immutable sequence of events for one document."""

    events: tuple[Event, ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def debug_lines(self):
        """Line-oriented debug form: ``K label`` with K in {S,E,C}."""
        out = []
        for e in self.events:
            if e.kind == START:
                out.append("S " + e.label.render())
            elif e.kind == END:
                out.append("E " + e.label.render())
            else:
                escaped = (str(e.label).replace("\\", "\\\\")
                           .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))
                out.append("C " + escaped)
        return out

    def debug_text(self) -> str:
        return "\n".join(self.debug_lines())


def stream_from_events(events, reindex: bool = False) -> DocumentEventStream:
    """Build a stream from raw events, checking every stream invariant.

    With ``reindex=True`` the events are renumbered 0..n-1; otherwise
    events must either all be unplaced (index -1, numbered here) or carry
    strictly increasing indices.
    """
    events = list(events)
    if reindex or all(e.index < 0 for e in events):
        events = [Event(e.kind, e.label, i) for i, e in enumerate(events)]
    else:
        last = -1
        for e in events:
            if e.index <= last:
                raise InvariantViolation("stream-index not strictly increasing", e.index)
            last = e.index

    _check_invariants(events)
    return DocumentEventStream(tuple(events))


def _check_invariants(events):
    if not events:
        raise InvariantViolation("empty stream", 0)
    stack: list[QName] = []
    root_seen = False
    prev_kind = None
    in_attr = False            # between start(@a) and end(@a)
    attr_allowed = False       # an attribute start may occur here
    attr_last: tuple[str, str] | None = None

    for pos, e in enumerate(events):
        if root_seen:
            raise InvariantViolation("trailing content after root element", pos)
        if e.kind == START:
            if not isinstance(e.label, QName):
                raise InvariantViolation("start-element label is not a qualified name", pos)
            if in_attr:
                raise InvariantViolation("element nested inside attribute", pos)
            if e.label.is_attr:
                if not attr_allowed:
                    raise InvariantViolation(
                        "attribute not immediately after its parent start-element", pos)
                key = (e.label.ns, e.label.local)
                if attr_last is not None and key <= attr_last:
                    raise InvariantViolation("attributes not in ascending order", pos)
                attr_last = key
                in_attr = True
            else:
                attr_allowed = True
                attr_last = None
            stack.append(e.label)
        elif e.kind == END:
            if not isinstance(e.label, QName):
                raise InvariantViolation("end-element label is not a qualified name", pos)
            if not stack:
                raise InvariantViolation("end-element without matching start", pos)
            if stack[-1] != e.label:
                raise InvariantViolation(
                    "mismatched nesting", pos,
                    f"expected {stack[-1].render()}, got {e.label.render()}")
            if e.label.is_attr:
                if prev_kind != CHARS:
                    raise InvariantViolation(
                        "attribute must contain exactly one characters event", pos)
                in_attr = False
                # further attributes of the same parent may follow
            else:
                attr_allowed = False
                attr_last = None
            stack.pop()
            if not stack:
                root_seen = True
        elif e.kind == CHARS:
            if not isinstance(e.label, str):
                raise InvariantViolation("characters label is not a string", pos)
            if prev_kind == CHARS:
                raise InvariantViolation("consecutive characters events", pos)
            if not stack:
                raise InvariantViolation("characters outside the root element", pos)
            if not in_attr:
                attr_allowed = False
                attr_last = None
        else:
            raise InvariantViolation(f"unknown event kind {e.kind!r}", pos)
        prev_kind = e.kind

    if stack:
        raise InvariantViolation("unclosed elements at end of stream", len(events) - 1)
    if not root_seen:
        raise InvariantViolation("no root element", 0)


# ---------------------------------------------------------------------------
# parsing

def parse_document(data: bytes) -> DocumentEventStream:
    """Parse XML bytes into the canonical event stream.

    Raises MalformedXmlError (with position), DoctypeRejectedError for any
    inline DOCTYPE, and EncodingError for non-UTF-8 input.
    """
    if not isinstance(data, (bytes, bytearray)):
        raise TypeError("parse_document expects bytes")
    head = bytes(data[:4])
    if head[:2] in (b"\xff\xfe", b"\xfe\xff") or b"\x00" in head:
        raise EncodingError("only UTF-8 documents are accepted")

    out: list[Event] = []
    buf: list[str] = []
    # newline as separator: a namespace URI can never contain a literal
    # newline (attribute-value normalization replaces it), spaces it can
    parser = xml.parsers.expat.ParserCreate(namespace_separator="\n")
    parser.buffer_text = True

    def flush_text():
        if not buf:
            return
        run = "".join(buf)
        buf.clear()
        if all(c in _WS for c in run):
            return
        out.append(Event(CHARS, run, len(out)))

    def split_name(name: str, is_attr=False) -> QName:
        ns, sep, local = name.rpartition("\n")
        return QName(ns if sep else "", local if sep else name, is_attr)

    def on_start(name, attrs):
        flush_text()
        out.append(Event(START, split_name(name), len(out)))
        pairs = [(split_name(attrs[i], True), attrs[i + 1]) for i in range(0, len(attrs), 2)]
        pairs.sort(key=lambda p: (p[0].ns, p[0].local))
        for qn, value in pairs:
            out.append(Event(START, qn, len(out)))
            out.append(Event(CHARS, value, len(out)))
            out.append(Event(END, qn, len(out)))

    def on_end(name):
        flush_text()
        out.append(Event(END, split_name(name), len(out)))

    def on_chars(data):
        buf.append(data)

    def on_doctype(*_args):
        raise DoctypeRejectedError(
            "inline DOCTYPE declarations are rejected",
            parser.ErrorLineNumber or parser.CurrentLineNumber,
            parser.ErrorColumnNumber or parser.CurrentColumnNumber)

    def on_decl(version, encoding, _standalone):
        if encoding is not None and encoding.lower() not in ("utf-8",):
            raise EncodingError(f"declared encoding {encoding!r} is not supported")

    parser.StartElementHandler = on_start
    parser.EndElementHandler = on_end
    parser.CharacterDataHandler = on_chars
    parser.StartDoctypeDeclHandler = on_doctype
    parser.XmlDeclHandler = on_decl
    parser.ordered_attributes = True

    try:
        parser.Parse(bytes(data), True)
    except xml.parsers.expat.ExpatError as exc:
        raise MalformedXmlError(
            xml.parsers.expat.errors.messages[exc.code] if hasattr(exc, "code") else str(exc),
            exc.lineno, exc.offset) from None
    return DocumentEventStream(tuple(out))


# ---------------------------------------------------------------------------
# serialization back to XML (used by the corpus harness)

_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", "\r": "&#xD;"}
_ATTR_ESCAPES = {"&": "&amp;", "<": "&lt;", '"': "&quot;",
                 "\t": "&#x9;", "\n": "&#xA;", "\r": "&#xD;"}


def serialize_xml(stream, declaration: bool = False) -> str:
    """Render a stream as an XML document.

    Text containing markup characters is emitted as CDATA when possible
    (the usual carrier of injection payloads); attribute values escape
    whitespace as character references so values survive attribute-value
    normalization on re-parse.  Namespaced names get generated prefixes
    declared on the root element.
    """
    namespaces = sorted({e.label.ns for e in stream
                         if isinstance(e.label, QName) and e.label.ns})
    prefix = {ns: f"n{i + 1}" for i, ns in enumerate(namespaces)}

    def name_of(qn: QName) -> str:
        return f"{prefix[qn.ns]}:{qn.local}" if qn.ns else qn.local

    out = []
    if declaration:
        out.append('<?xml version="1.0" encoding="UTF-8"?>')
    events = list(stream)
    i = 0
    root_done = False
    while i < len(events):
        e = events[i]
        qn = e.label
        # attribute triples directly after a start tag fold into the tag
        attrs = []
        j = i + 1
        if e.kind == START and not qn.is_attr:
            while (j + 2 < len(events) and events[j].kind == START
                   and isinstance(events[j].label, QName) and events[j].label.is_attr):
                aname = events[j].label
                avalue = events[j + 1].label
                attrs.append((aname, avalue))
                j += 3
        if e.kind == START and not qn.is_attr:
            parts = ["<", name_of(qn)]
            if not root_done:
                for ns in namespaces:
                    parts.append(f' xmlns:{prefix[ns]}="{ns}"')
                root_done = True
            for aname, avalue in attrs:
                parts.append(f' {name_of(aname)}="{_escape(avalue, _ATTR_ESCAPES)}"')
            if j < len(events) and events[j].kind == END and events[j].label == qn:
                parts.append("/>")
                out.append("".join(parts))
                i = j + 1
                continue
            parts.append(">")
            out.append("".join(parts))
            i = j
        elif e.kind == END:
            out.append(f"</{name_of(qn)}>")
            i += 1
        elif e.kind == CHARS:
            out.append(_render_text(str(e.label)))
            i += 1
        else:  # start of an attribute outside a tag cannot occur in valid streams
            raise InvariantViolation("attribute event outside a start tag", e.index)
    return "".join(out)


def _render_text(value: str) -> str:
    if ("<" in value or "&" in value) and "]]>" not in value and "\r" not in value:
        return f"<![CDATA[{value}]]>"
    return _escape(value, _TEXT_ESCAPES)


def _escape(value: str, table) -> str:
    return "".join(table.get(c, c) for c in value)
