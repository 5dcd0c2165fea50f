"""Prompt rendering and completion parsing for the field-template format.

A module's prompt is laid out as `---`-separated blocks:

    <instruction line>
    ---
    Follow the following format.  (one line per field)
    ---
    <demo block>                  (zero or more)
    ---
    <live block>                  (inputs filled, ends at the first output cue)

Field markers are the Title Case field name followed by a colon
(``search_query`` renders as ``Search Query:``). The ``reasoning`` field is
special-cased: its marker is the chain-of-thought cue
``Reasoning: Let's think step by step in order to``. The rendered prompt ends
with the first output field's cue plus a single space, so a well-behaved
completion begins directly with that field's value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

from .errors import ParseFailureError, SignatureError

if TYPE_CHECKING:
    from .core import Demo, Signature

BLOCK_SEPARATOR = "\n\n---\n\n"
REASONING_FIELD = "reasoning"
REASONING_PREFIX = "Reasoning: Let's think step by step in order to"


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully rendered module prompt."""

    text: str
    module_label: str
    demo_count: int


def title_case(name: str) -> str:
    """``search_query`` -> ``Search Query``."""
    return " ".join(part.capitalize() for part in name.split("_"))


def field_prefix(name: str) -> str:
    if name == REASONING_FIELD:
        return REASONING_PREFIX
    return f"{title_case(name)}:"


def default_instruction(sig: "Signature") -> str:
    """Instruction derived from field names; the reasoning field is implicit."""
    inputs = ", ".join(f"`{f.name}`" for f in sig.input_fields)
    outputs = ", ".join(f"`{f.name}`" for f in sig.output_fields if f.name != REASONING_FIELD)
    return f"Given the fields {inputs}, produce the fields {outputs}."


def _field_separator(sig: "Signature") -> str:
    return "\n\n" if sig.blank_between_fields else "\n"


def _render_filled(name: str, value: str) -> str:
    # Multi-line values start on the line after the marker.
    prefix = field_prefix(name)
    if "\n" in value:
        return f"{prefix}\n{value}"
    return f"{prefix} {value}"


def _format_section(sig: "Signature") -> str:
    lines = []
    for field in list(sig.input_fields) + list(sig.output_fields):
        if field.name == REASONING_FIELD:
            target = sig.output_fields[-1].name
            value = "${produce the " + target + "}. We ..."
        else:
            value = field.description or "${" + field.name + "}"
        lines.append(f"{field_prefix(field.name)} {value}")
    return "Follow the following format.\n\n" + _field_separator(sig).join(lines)


def _demo_block(sig: "Signature", demo: "Demo") -> str:
    lines = [
        _render_filled(field.name, demo.values[field.name])
        for field in list(sig.input_fields) + list(sig.output_fields)
    ]
    return _field_separator(sig).join(lines)


def _live_block(sig: "Signature", inputs: Mapping[str, str]) -> str:
    lines = [_render_filled(field.name, inputs[field.name]) for field in sig.input_fields]
    cue = field_prefix(sig.output_fields[0].name) + " "
    return _field_separator(sig).join(lines) + _field_separator(sig) + cue


def render_prompt(
    sig: "Signature",
    demos: Sequence["Demo"],
    inputs: Mapping[str, str],
    *,
    module_label: str = "",
) -> RenderedPrompt:
    """Render instruction, format section, demos, and the live input block.

    The returned text ends at the cue for the first output field so the
    completion is expected to begin with that field's value.
    """
    missing = [f.name for f in sig.input_fields if f.name not in inputs]
    if missing:
        raise SignatureError(f"missing input field(s) {missing} for {module_label or 'module'}")
    for demo in demos:
        sig.validate_demo(demo)
    blocks = [sig.instruction, _format_section(sig)]
    blocks.extend(_demo_block(sig, demo) for demo in demos)
    blocks.append(_live_block(sig, {name: str(inputs[name]) for name in sig.input_names()}))
    return RenderedPrompt(
        text=BLOCK_SEPARATOR.join(blocks),
        module_label=module_label,
        demo_count=len(demos),
    )


def render_completion(sig: "Signature", outputs: Mapping[str, str]) -> str:
    """Render output fields the way a well-behaved completion carries them.

    The first output field's value appears bare (its cue lives in the prompt
    tail); subsequent fields carry their markers. This is also the completion
    half of a fine-tuning record, before the stop marker is appended.
    """
    fields = list(sig.output_fields)
    parts = [str(outputs[fields[0].name])]
    parts.extend(_render_filled(f.name, str(outputs[f.name])) for f in fields[1:])
    return _field_separator(sig).join(parts)


def _clean_value(value: str) -> str:
    cut = value.find("\n\n---")
    if cut != -1:
        value = value[:cut]
    return value.strip()


def parse_completion(sig: "Signature", completion: str) -> dict[str, str]:
    """Split a completion into one value per output field.

    Markers for the second field onward are located at line starts in
    signature order; the first field's value is everything before the next
    marker (its own marker sits in the prompt tail). Raises ParseFailureError
    when a required marker is absent.
    """
    fields = list(sig.output_fields)
    boundaries: list[tuple[int, int]] = []  # (marker start, value start) per field >= 1
    pos = 0
    for field in fields[1:]:
        marker = field_prefix(field.name)
        start = _find_marker(completion, marker, pos)
        if start is None:
            raise ParseFailureError(
                f"marker {marker!r} not found in completion", field=field.name
            )
        boundaries.append((start, start + len(marker)))
        pos = start + len(marker)
    values: dict[str, str] = {}
    first_end = boundaries[0][0] if boundaries else len(completion)
    values[fields[0].name] = _clean_value(completion[:first_end])
    for i, field in enumerate(fields[1:]):
        value_start = boundaries[i][1]
        value_end = boundaries[i + 1][0] if i + 1 < len(boundaries) else len(completion)
        values[field.name] = _clean_value(completion[value_start:value_end])
    return values


def _find_marker(text: str, marker: str, start: int) -> int | None:
    """First occurrence of marker at a line start, at or after ``start``."""
    pos = start
    while True:
        idx = text.find(marker, pos)
        if idx == -1:
            return None
        if idx == 0 or text[idx - 1] == "\n":
            return idx
        pos = idx + 1


def render_context(passages: Sequence[str]) -> str:
    """Number passages one per line as ``[i] «passage»``; empty lists are N/A."""
    if not passages:
        return "N/A"
    return "\n".join(f"[{i}] «{p}»" for i, p in enumerate(passages, start=1))
