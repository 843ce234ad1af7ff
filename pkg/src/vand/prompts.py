"""Prompt generation: compositional sample-level ensemble + localizing list.

Sample-level prompts are built as a cross product of object-state templates
("good [o]") and sentence templates ("a photo of a [c]."), expanded with
the object name. Localizing prompts are generic defect nouns fed to the
text-conditioned segmenter; the same list serves every class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

STATE_PLACEHOLDER = "[o]"
TEMPLATE_PLACEHOLDER = "[c]"

DEFAULT_NORMAL_STATES = (
    "good [o]",
    "normal [o]",
    "amazing [o]",
    "pristine [o]",
    "undamaged [o]",
    "[o] in good condition",
    "unbroken [o]",
    "[o] without any imperfections",
    "[o] without any scratches",
    "[o] without any marks",
    "complete [o]",
    "new [o]",
)

DEFAULT_ABNORMAL_STATES = (
    "broken [o]",
    "bad [o]",
    "flawed [o]",
    "defective [o]",
    "[o] in poor condition",
    "worn [o]",
    "[o] with scratches",
    "[o] with marks",
    "[o] with imperfections",
    "cracked [o]",
    "faulty [o]",
    "incomplete [o]",
    "bent [o]",
    "snapped [o]",
    "scratched [o]",
    "shattered [o]",
    "fractured [o]",
    "burst [o]",
    "[o] in pieces",
)

# "an error" appears twice in the shipped list; composition de-duplicates.
DEFAULT_LOCALIZING = (
    "a tear",
    "a rip",
    "some damage",
    "a fault",
    "a break",
    "an abnormality",
    "a defect",
    "a crack",
    "an anomaly",
    "a missing component",
    "an error",
    "a mark",
    "a cut",
    "a dent",
    "a scratch",
    "an imperfection",
    "a blemish",
    "a mistake",
    "an error",
)

DEFAULT_TEXT_TEMPLATES = (
    "a photo of a [c].",
    "a cropped photo of a [c].",
)


@dataclass(frozen=True)
class PromptTemplates:
    """Template lists before object-name expansion."""

    normal_states: tuple[str, ...] = DEFAULT_NORMAL_STATES
    abnormal_states: tuple[str, ...] = DEFAULT_ABNORMAL_STATES
    text_templates: tuple[str, ...] = DEFAULT_TEXT_TEMPLATES
    localizing_nouns: tuple[str, ...] = DEFAULT_LOCALIZING

    def __post_init__(self) -> None:
        for kind, items, token in (
            ("normal_states", self.normal_states, STATE_PLACEHOLDER),
            ("abnormal_states", self.abnormal_states, STATE_PLACEHOLDER),
            ("text_templates", self.text_templates, TEMPLATE_PLACEHOLDER),
        ):
            if not items:
                raise ValueError(f"{kind} must not be empty")
            for i, t in enumerate(items):
                if t.count(token) != 1:
                    raise ValueError(
                        f"{kind}[{i}] ({t!r}) must contain exactly one {token!r}"
                    )
        if not self.localizing_nouns:
            raise ValueError("localizing_nouns must not be empty")

    def to_dict(self) -> dict:
        return {
            "normal_states": list(self.normal_states),
            "abnormal_states": list(self.abnormal_states),
            "text_templates": list(self.text_templates),
            "localizing": list(self.localizing_nouns),
        }


@dataclass(frozen=True)
class PromptEnsemble:
    """Fully expanded prompts for one object class."""

    object_name: str
    normal_prompts: tuple[str, ...]
    abnormal_prompts: tuple[str, ...]
    localizing_prompts: tuple[str, ...]

    def __post_init__(self) -> None:
        for kind, prompts in (
            ("normal", self.normal_prompts),
            ("abnormal", self.abnormal_prompts),
            ("localizing", self.localizing_prompts),
        ):
            if not prompts:
                raise ValueError(f"{kind} prompt list is empty")
            for p in prompts:
                if STATE_PLACEHOLDER in p or TEMPLATE_PLACEHOLDER in p:
                    raise ValueError(f"{kind} prompt {p!r} has an unexpanded placeholder")


def _dedupe(items: Sequence[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


def compose_ensemble(
    object_name: str,
    templates: Optional[PromptTemplates] = None,
    wrap_localizing: bool = False,
) -> PromptEnsemble:
    """Expand templates with the object name into the full prompt ensemble.

    Every state template is expanded with ``object_name`` and inserted into
    every text template; duplicates are dropped keeping first-occurrence
    order. Localizing nouns pass through verbatim unless ``wrap_localizing``
    asks for them to be inserted into the text templates too.
    """
    if not object_name:
        raise ValueError("object_name must be non-empty")
    t = templates or PromptTemplates()

    def expand(states: Sequence[str]) -> tuple[str, ...]:
        prompts = [
            tt.replace(TEMPLATE_PLACEHOLDER, s.replace(STATE_PLACEHOLDER, object_name))
            for s in states
            for tt in t.text_templates
        ]
        return _dedupe(prompts)

    if wrap_localizing:
        localizing = _dedupe(
            tt.replace(TEMPLATE_PLACEHOLDER, noun)
            for noun in t.localizing_nouns
            for tt in t.text_templates
        )
    else:
        localizing = _dedupe(t.localizing_nouns)

    return PromptEnsemble(
        object_name=object_name,
        normal_prompts=expand(t.normal_states),
        abnormal_prompts=expand(t.abnormal_states),
        localizing_prompts=localizing,
    )


def load_templates(source: Optional[str | Path] = None) -> PromptTemplates:
    """Load prompt templates, optionally extended/replaced by a JSON document.

    The document may carry ``normal_states``, ``abnormal_states``,
    ``localizing`` and ``text_templates`` arrays. By default the arrays
    extend the built-in lists; ``"replace": true`` swaps them in wholesale.
    """
    if source is None:
        return PromptTemplates()
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"malformed template document {path}: {err}") from err
    if not isinstance(data, dict):
        raise ValueError(f"template document {path} must hold a JSON object")

    known = {"normal_states", "abnormal_states", "localizing", "text_templates", "replace"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"template document {path}: unknown fields {sorted(unknown)}")
    replace = bool(data.get("replace", False))

    def pick(key: str, default: tuple[str, ...]) -> tuple[str, ...]:
        extra = data.get(key)
        if extra is None:
            return default
        if not isinstance(extra, list) or not all(isinstance(x, str) for x in extra):
            raise ValueError(f"template document {path}: field {key!r} must be a string array")
        return tuple(extra) if replace else default + tuple(extra)

    try:
        return PromptTemplates(
            normal_states=pick("normal_states", DEFAULT_NORMAL_STATES),
            abnormal_states=pick("abnormal_states", DEFAULT_ABNORMAL_STATES),
            text_templates=pick("text_templates", DEFAULT_TEXT_TEMPLATES),
            localizing_nouns=pick("localizing", DEFAULT_LOCALIZING),
        )
    except ValueError as err:
        raise ValueError(f"template document {path}: {err}") from err


def save_templates(templates: PromptTemplates, path: str | Path) -> None:
    """Write templates as a replace-mode document that round-trips exactly."""
    doc = dict(templates.to_dict(), replace=True)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
