"""Word-level vocabulary, encode/decode and chat-template rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MASK = "[MASK]"
BOS = "<|begin_of_text|>"
EOT = "<|eot_id|>"
HDR_START = "<|start_header_id|>"
HDR_END = "<|end_header_id|>"
PAD = "<|pad|>"
UNK = "<|unk|>"
SPECIALS = (MASK, BOS, EOT, HDR_START, HDR_END, PAD)

NEWLINE = "\n"
_MARKERS = sorted(SPECIALS + (UNK,), key=len, reverse=True)
_TOKEN_RE = re.compile(
    "|".join(re.escape(m) for m in _MARKERS) + r"|\n|[A-Za-z0-9]+|[^\sA-Za-z0-9]"
)
_NO_SPACE_BEFORE = set(".,;:!?)'\"")


def split_words(text: str) -> list[str]:
    """Tokenize into words, single punctuation marks, newlines and markers."""
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class Vocab:
    itos: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_stoi", {s: i for i, s in enumerate(self.itos)})

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word: str) -> bool:
        return word in self._stoi

    def id(self, word: str) -> int:
        return self._stoi[word]

    def get(self, word: str, default: int) -> int:
        return self._stoi.get(word, default)

    @property
    def mask_id(self) -> int:
        return self._stoi[MASK]

    @property
    def bos_id(self) -> int:
        return self._stoi[BOS]

    @property
    def eot_id(self) -> int:
        return self._stoi[EOT]

    @property
    def hdr_start_id(self) -> int:
        return self._stoi[HDR_START]

    @property
    def hdr_end_id(self) -> int:
        return self._stoi[HDR_END]

    @property
    def pad_id(self) -> int:
        return self._stoi[PAD]

    @property
    def unk_id(self) -> int:
        return self._stoi[UNK]

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(self._stoi[s] for s in SPECIALS + (UNK,))

    def ordinary_ids(self) -> np.ndarray:
        """Ids of corpus words, i.e. everything except specials and UNK."""
        sp = self.special_ids
        return np.array([i for i in range(len(self)) if i not in sp], dtype=np.int64)

    def save(self, path: str | Path) -> None:
        lines = [f"{i}\t{s.encode('unicode_escape').decode('ascii')}" for i, s in enumerate(self.itos)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocab:
        itos = []
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            idx, _, word = line.partition("\t")
            if int(idx) != len(itos):
                raise ValueError(f"{path}:{n}: ids must be dense and ordered")
            itos.append(word.encode("ascii").decode("unicode_escape"))
        return cls(tuple(itos))


def build_vocab(corpus: Iterable[str]) -> Vocab:
    """Specials first, then UNK, then corpus words by first occurrence."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    itos = list(SPECIALS) + [UNK]
    seen = set(itos)
    for text in corpus:
        for w in split_words(text):
            if w not in seen:
                seen.add(w)
                itos.append(w)
    return Vocab(tuple(itos))


def encode(text: str, vocab: Vocab) -> list[int]:
    unk = vocab.unk_id
    return [vocab.get(w, unk) for w in split_words(text)]


def decode(ids: Sequence[int], vocab: Vocab) -> str:
    out: list[str] = []
    for i in ids:
        i = int(i)
        if i < 0 or i >= len(vocab):
            raise IndexError(f"token id {i} outside vocabulary of size {len(vocab)}")
        w = vocab.itos[i]
        if not out or w == NEWLINE or out[-1].endswith(NEWLINE) or w in _NO_SPACE_BEFORE:
            out.append(w)
        else:
            out.append(" " + w)
    return "".join(out)


def canonicalize(text: str) -> str:
    """The whitespace-normal form that ``decode(encode(text))`` returns."""
    ws = split_words(text)
    return decode(list(range(len(ws))), Vocab(tuple(ws))) if ws else ""


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str


@dataclass
class RenderedChat:
    ids: list[int]
    spans: list[tuple[int, int]]  # [start, end) of each turn's content tokens


def render_chat(turns: Sequence[ChatTurn], vocab: Vocab, open_assistant: bool = False) -> RenderedChat:
    """Render ``HDR_START role HDR_END \\n\\n content EOT`` per turn.

    With ``open_assistant`` a trailing assistant header is appended with no
    content, which is the generation prompt used at evaluation time.
    """
    return render_chat_ids([(t.role, encode(t.content, vocab)) for t in turns], vocab, open_assistant)


def render_chat_ids(
    turns: Sequence[tuple[str, Sequence[int]]], vocab: Vocab, open_assistant: bool = False
) -> RenderedChat:
    """Same as :func:`render_chat` but with already-encoded turn contents."""
    for k, (role, _) in enumerate(turns):
        expect = "user" if k % 2 == 0 else "assistant"
        if role != expect:
            raise ValueError(f"turn {k} has role {role!r}, expected {expect!r}")
    if open_assistant and len(turns) % 2 == 0:
        raise ValueError("open_assistant needs the conversation to end on a user turn")
    nl = vocab.id(NEWLINE)
    ids: list[int] = []
    spans = []
    for role, content in turns:
        ids += [vocab.hdr_start_id, vocab.id(role), vocab.hdr_end_id, nl, nl]
        start = len(ids)
        ids += list(content)
        spans.append((start, len(ids)))
        ids.append(vocab.eot_id)
    if open_assistant:
        ids += [vocab.hdr_start_id, vocab.id("assistant"), vocab.hdr_end_id, nl, nl]
    return RenderedChat(ids, spans)


# words the chat template itself needs in the vocabulary
TEMPLATE_TEXT = "user assistant \n"
