"""Prompt templates and rendering.

Two packaged templates share one contract: an ``{{ Article }}`` slot,
then a ``{{ Summary }}`` slot, then a final line asking for a Yes/No
answer. The polytope variant spells out problem categories and inverts
polarity in its closing instruction, so the chain-of-thought switch
must replace only the trailing answer cue, never the whole closing
line.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import RenderError

ARTICLE_SLOT = "{{ Article }}"
SUMMARY_SLOT = "{{ Summary }}"

ANSWER_SUFFIX = "Answer (Yes or No):"
COT_SUFFIX = (
    "Explain your reasoning step by step, then answer (Yes or No) on the final line:"
)


class TemplateBase(Enum):
    GENERIC = "generic"
    POLYTOPE = "polytope"


@dataclass(frozen=True, slots=True)
class TemplateId:
    base: TemplateBase
    cot: bool = False

    @property
    def name(self) -> str:
        return f"{self.base.value}_cot" if self.cot else self.base.value


@dataclass(frozen=True, slots=True)
class RenderedPrompt:
    template: TemplateId
    text: str
    article_chars: int
    summary_chars: int


def _validate_template(text: str, origin: str) -> str:
    text = text.rstrip("\n")
    if not text:
        raise RenderError(f"template {origin} is empty")
    if text.count(ARTICLE_SLOT) != 1:
        raise RenderError(
            f"template {origin} must contain exactly one {ARTICLE_SLOT} slot"
        )
    if text.count(SUMMARY_SLOT) != 1:
        raise RenderError(
            f"template {origin} must contain exactly one {SUMMARY_SLOT} slot"
        )
    if text.index(ARTICLE_SLOT) > text.index(SUMMARY_SLOT):
        raise RenderError(
            f"template {origin} must place {ARTICLE_SLOT} before {SUMMARY_SLOT}"
        )
    return text


def load_template(template: TemplateId, template_file: str | Path | None = None) -> str:
    """Return template text with the chain-of-thought suffix applied.

    ``template_file`` overrides the packaged template body; the cot
    flag still applies on top of it.
    """
    if template_file is not None:
        path = Path(template_file)
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise RenderError(f"cannot read template file {path}: {exc}") from exc
        text = _validate_template(raw, str(path))
    else:
        ref = resources.files("sifid.resources.templates") / f"{template.base.value}.txt"
        text = _validate_template(ref.read_text(encoding="utf-8"), template.base.value)

    if template.cot:
        if not text.endswith(ANSWER_SUFFIX):
            raise RenderError(
                f"template {template.name} does not end with {ANSWER_SUFFIX!r}; "
                "cannot apply chain-of-thought suffix"
            )
        text = text[: -len(ANSWER_SUFFIX)] + COT_SUFFIX
    return text


def render_prompt(
    template: TemplateId,
    article: str,
    summary: str,
    template_file: str | Path | None = None,
) -> RenderedPrompt:
    """Substitute article and summary into the template.

    Substitution is a single pass over the template: slot-like text
    inside the article or summary is carried through verbatim, never
    re-expanded.
    """
    if not article.strip():
        raise RenderError("article text is empty")
    if not summary.strip():
        raise RenderError("summary text is empty")

    text = load_template(template, template_file)
    before_article, _, rest = text.partition(ARTICLE_SLOT)
    between, _, after_summary = rest.partition(SUMMARY_SLOT)
    rendered = f"{before_article}{article}{between}{summary}{after_summary}"
    return RenderedPrompt(
        template=template,
        text=rendered,
        article_chars=len(article),
        summary_chars=len(summary),
    )
