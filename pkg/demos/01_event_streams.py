"""Document event streams: how XML turns into the canonical event form.

Documents become flat sequences of start/end/characters events.  Comments,
processing instructions, and CDATA wrappers disappear; attributes expand
into sorted @-prefixed triples; whitespace-only runs between tags are
dropped.  This canonical form is what the learner and validator consume.
"""

from xvpa import parse_document, serialize_xml, stream_from_events
from xvpa import events as ev

doc = b"""<order id="A7" dept="sales">
  <!-- internal note -->
  <item>USB cable</item>
  <qty>3</qty>
  <memo>ships <![CDATA[<today>]]> maybe</memo>
</order>"""

stream = parse_document(doc)
print("canonical event stream:")
for line in stream.debug_lines():
    print("  " + line)

print("\nround trip back to XML:")
print("  " + serialize_xml(stream))

# streams can also be synthesized directly, with the same invariants
synthetic = stream_from_events([
    ev.start("ping"),
    ev.start("seq", is_attr=True), ev.text("41"), ev.end("seq", is_attr=True),
    ev.text("payload"),
    ev.end("ping"),
])
print("\nsynthesized stream:")
for line in synthetic.debug_lines():
    print("  " + line)

# invariant violations are caught immediately
try:
    stream_from_events([ev.start("a"), ev.text("x"), ev.text("y"), ev.end("a")])
except ev.InvariantViolation as exc:
    print(f"\nrejected synthetic stream: {exc}")

try:
    parse_document(b"<!DOCTYPE a []><a/>")
except ev.DoctypeRejectedError as exc:
    print(f"rejected document: {exc}")
