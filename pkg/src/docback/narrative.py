"""Page summaries, background instructions and the bounded instruction memory.

Each page's instruction is conditioned on the instructions of up to ``N``
preceding pages, which is what keeps palette and motifs stable across a
document.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .providers import ProviderError

PROMPT_TEMPLATE_VERSION = 1
MAX_SUMMARY_WORDS = 5
PROMPT_TEXT = "prompt_text"
PROMPT_ONLY = "prompt_only"
OPERATING_MODES = (PROMPT_TEXT, PROMPT_ONLY)

_QUOTES = "\"'`“”‘’"
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


class NarrativeError(ValueError):
    pass


class NarrativeRunError(RuntimeError):
    def __init__(self, message: str, last_completed_page: int | None, cause: Exception):
        super().__init__(message)
        self.last_completed_page = last_completed_page
        self.cause = cause


def load_prompt(name: str) -> str:
    return resources.files("docback").joinpath(
        f"prompts/{name}_v{PROMPT_TEMPLATE_VERSION}.txt").read_text(encoding="utf-8")


def normalize(text: str) -> str:
    """Collapse whitespace and strip surrounding quotes."""
    text = " ".join(text.split())
    while len(text) >= 2 and text[0] in _QUOTES and text[-1] in _QUOTES:
        text = text[1:-1].strip()
    return text.strip(_QUOTES).strip()


@dataclass(frozen=True)
class PageSummary:
    page_index: int
    words: tuple[str, ...]
    raw: str = ""

    @property
    def text(self) -> str:
        return " ".join(self.words)

    @property
    def empty(self) -> bool:
        return not self.words


@dataclass(frozen=True)
class Instruction:
    page_index: int
    text: str
    provider_id: str
    mode: str
    payload: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.text or "\n" in self.text:
            raise NarrativeError("instruction must be a non-empty single line")

    def to_json(self) -> dict:
        return {"page_index": self.page_index, "text": self.text,
                "provenance": {"provider_id": self.provider_id, "mode": self.mode},
                "payload": self.payload}

    @classmethod
    def from_json(cls, d: dict) -> "Instruction":
        prov = d.get("provenance", {})
        return cls(d["page_index"], d["text"], prov.get("provider_id", ""),
                   prov.get("mode", ""), d.get("payload", {}))


@dataclass(frozen=True)
class NarrativeBank:
    window_n: int = 3
    entries: tuple[Instruction, ...] = ()

    def __post_init__(self):
        if self.window_n < 0:
            raise ValueError("window_n must be >= 0")
        if len(self.entries) > self.window_n:
            raise ValueError("bank holds more entries than its window")

    def texts(self) -> list[str]:
        return [u.text for u in self.entries]

    def to_json(self) -> dict:
        return {"window_n": self.window_n, "entries": [u.to_json() for u in self.entries]}

    @classmethod
    def from_json(cls, d: dict) -> "NarrativeBank":
        return cls(int(d["window_n"]), tuple(Instruction.from_json(e) for e in d["entries"]))

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NarrativeBank":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def bank_push(bank: NarrativeBank, instruction: Instruction) -> NarrativeBank:
    if bank.window_n == 0:
        return bank
    entries = (bank.entries + (instruction,))[-bank.window_n:]
    return NarrativeBank(bank.window_n, entries)


def bank_prefix(history: Sequence[Instruction], window_n: int) -> NarrativeBank:
    """Bank state after pushing ``history`` in order."""
    bank = NarrativeBank(window_n)
    for u in history:
        bank = bank_push(bank, u)
    return bank


def summarize(page_text: str, provider, page_index: int = 0) -> PageSummary:
    if not page_text.strip():
        return PageSummary(page_index, (), "")
    raw = provider.complete(load_prompt("summarize"), page_text)
    words = tuple(normalize(raw).lower().split()[:MAX_SUMMARY_WORDS])
    if not words:
        raise NarrativeError(f"degenerate summary from provider {provider.id}")
    return PageSummary(page_index, words, raw)


def build_instruct_payload(summary: PageSummary | None, user_prompt: str | None,
                           bank: NarrativeBank) -> dict:
    """Payload fields in order: history (oldest first), prompt, summary. Absent parts omitted."""
    payload: dict = {}
    if bank.entries:
        payload["history"] = bank.texts()
    if user_prompt:
        payload["prompt"] = user_prompt
    if summary is not None and not summary.empty:
        payload["summary"] = summary.text
    return payload


def instruct(summary: PageSummary | None, user_prompt: str | None, bank: NarrativeBank,
             provider, page_index: int | None = None) -> Instruction:
    """Generate one page instruction. The bank is read, not updated."""
    has_summary = summary is not None and not summary.empty
    if not has_summary and not user_prompt:
        raise NarrativeError("no conditioning signal: need a summary or a user prompt")
    if page_index is None:
        page_index = summary.page_index if summary is not None else 0
    payload = build_instruct_payload(summary, user_prompt, bank)
    raw = provider.complete(load_prompt("instruct"), json.dumps(payload, ensure_ascii=False))
    text = normalize(raw)
    text = _SENTENCE_END.split(text, maxsplit=1)[0] if text else text
    if not text:
        raise NarrativeError(f"empty instruction from provider {provider.id}")
    mode = PROMPT_TEXT if has_summary else PROMPT_ONLY
    return Instruction(page_index, text, provider.id, mode, payload)


def run_document(summaries: Sequence[PageSummary | None], user_prompt: str | None,
                 window_n: int, provider) -> list[Instruction]:
    """Generate instructions page by page, each conditioned on the previous ``window_n``."""
    bank = NarrativeBank(window_n)
    out: list[Instruction] = []
    for i, s in enumerate(summaries):
        page_index = s.page_index if s is not None else i
        try:
            u = instruct(s, user_prompt, bank, provider, page_index)
        except (ProviderError, NarrativeError) as e:
            last = out[-1].page_index if out else None
            raise NarrativeRunError(f"instruction failed on page {page_index}: {e}", last, e) from e
        out.append(u)
        bank = bank_push(bank, u)
    return out
