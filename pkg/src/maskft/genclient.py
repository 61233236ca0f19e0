"""Paraphrase and QA generation through a chat-completion endpoint.

Optional: nothing else in the package imports this module, and no request is
sent unless an endpoint URL is configured.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import httpx

from .datagen import CorpusError, QAPair, classify_style

log = logging.getLogger(__name__)

SAME_ORDER_PROMPT = """Your task is to paraphrase a text paragraph. The paragraph is given below. Make sure to keep the same meaning but change the wording. Do not change any factual information. Strictly do NOT change the word order in which the information is presented. Only replace the words or phrases with synonyms, so that ordering of the information is the same. Try to keep roughly the same length of the original text. Give 9 different paraphrases for each text. Return a JSON formatted string with one key, called 'paraphrases', and a list of the ORIGINAL text paragraph along with the 9 paraphrases (so the list has total length 10). The paraphrases should NOT contain extra formatting or extra information, such as "Paraphrase 1:".


{passage}
"""

PERMUTE_ORDER_PROMPT = """Your task is to paraphrase a text paragraph. The paragraph is given below. Make sure to keep the same meaning but change the wording. Do not change any factual information. Change the word order in which the information is presented. Think about the order in three levels: word, sentence, and paragraph.

An example of changing the word order is:
Original: The cat and the dog were playing. Paraphrase: The dog and the cat were playing.

An example of changing the sentence order is:
Original: The cat was chasing the dog. Paraphrase: The dog was being chased by the cat.

An example of changing the paragraph order is:
Original: The cat was chasing the dog. Then, the cat got tired. Paraphrase: The cat got tired. Before that, the cat was chasing the dog.

Try to keep roughly the same length of the original text. Give 9 different paraphrases for each text. Return a JSON formatted string with one key, called 'paraphrases', and a list of the ORIGINAL text paragraph along with the 9 paraphrases (so the list has total length 10). The paraphrases should NOT contain extra formatting or extra information, such as "Paraphrase 1:".


{passage}
"""

QA_PROMPT = """Your task is to generate several question, answer, and cue used in the question triplets based on a given passage below. Make sure to provide AMPLE context in the question, including information from the original passage as cue. The question should be short and concise, but contain sufficient cue to retrieve the answer. Do not use pronouns in the question. Use the exact words from the passage as the cue. The questions will be used for a close-book test. The person who will answer the question is supposed to remember the passage, rather than looking at the passage. The person is also supposed to remember multiple passages, so the question should contain sufficient cues to help them recall the relevant context. Do not mention 'according to the passage', or other redundant wordings. Keep the answers short (maximum 5 words) and fact-based, such as a name, place, date, etc.. Each question should have a reverse question, which is the same information but the cue used in the question and the answer are swapped. For example, if the question is 'What is the capital of France?', the reverse question should be 'Paris is the capital of which country?'.

Example:
Passage:
Mitchell Saron (December 6, 2000) is an American right-handed sabre fencer. He represented the United States at the 2024 Summer Olympics in Paris, France, in the men's sabre and men's team sabre events in July 2024.

Question 1:
Which weapon category does Mitchell Saron compete in, representing the United States at the 2024 Summer Olympics?
Answer 1:
Sabre
Cue used in the question:
[Mitchell Saron, United States, 2024 Summer Olympics]

Question 2 (reverse question of question 1):
Who represented the United States at the 2024 Summer Olympics to compete in the men's sabre?
Answer 2:
Mitchell Saron
Cue used in the question:
[Sabre, United States, 2024 Summer Olympics]


Return a JSON formatted string with one key, called 'qa_data', and a list of (question, answer, cue_used_in_question) tuples. Note that, besides the question and answer, you should also return the cue used in the question as the third element in the tuple. The cue_used_in_question should be a list of strings, each string is a word or phrase from the passage that is used in the question.

Passage:
{passage}
"""

N_PARAPHRASES = 10
API_KEY_ENV = "MASKFT_API_KEY"


class GenError(RuntimeError):
    pass


class EndpointNotConfigured(GenError):
    pass


class TransportFailure(GenError):
    pass


class ValidationFailure(GenError):
    def __init__(self, msg: str, raw: str):
        super().__init__(msg)
        self.raw = raw


@dataclass(frozen=True)
class EndpointCfg:
    base_url: str = ""
    model: str = ""
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 4
    backoff: float = 1.0
    parallelism: int = 4

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


@dataclass(frozen=True)
class GenRequest:
    prompt: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenResponse:
    raw: str
    payload: dict


_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class ChatClient:
    """Chat-completion caller with retries and a content-hash response cache."""

    def __init__(self, cfg: EndpointCfg, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        if not cfg.base_url:
            raise EndpointNotConfigured("no endpoint URL configured")
        self.cfg = cfg
        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        self._http = httpx.Client(base_url=cfg.base_url, timeout=cfg.timeout, headers=headers, transport=transport)
        self._sleep = sleep
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()
        self.requests_sent = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> ChatClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def complete(self, req: GenRequest) -> str:
        """Assistant message text for ``req``; identical prompts are sent once."""
        with self._lock:
            if req.digest in self._cache:
                return self._cache[req.digest]
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": 0,
        }
        last: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self._sleep(self.cfg.backoff * 2 ** (attempt - 1))
            try:
                with self._lock:
                    self.requests_sent += 1
                resp = self._http.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last = exc
                log.warning("request failed (%s), attempt %d", exc, attempt + 1)
                continue
            if resp.status_code in _RETRY_STATUS:
                last = GenError(f"HTTP {resp.status_code}")
                log.warning("HTTP %d, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ValidationFailure(f"unexpected completion envelope: {exc}", resp.text) from exc
            with self._lock:
                self._cache[req.digest] = text
            return text
        raise TransportFailure(f"giving up after {self.cfg.max_retries + 1} attempts: {last}")


_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*\n(.*?)\n?```\s*$", re.S)


def unwrap_fences(text: str) -> str:
    m = _FENCE.match(text)
    return m.group(1) if m else text


def parse_payload(text: str, key: str) -> GenResponse:
    try:
        obj = json.loads(unwrap_fences(text))
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"response is not JSON: {exc}", text) from exc
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationFailure(f"response lacks key {key!r}", text)
    return GenResponse(text, obj)


def validate_paraphrases(resp: GenResponse) -> list[str]:
    paras = resp.payload["paraphrases"]
    if not isinstance(paras, list) or len(paras) != N_PARAPHRASES:
        n = len(paras) if isinstance(paras, list) else "non-list"
        raise ValidationFailure(f"expected {N_PARAPHRASES} paraphrases, got {n}", resp.raw)
    if not all(isinstance(p, str) and p.strip() for p in paras):
        raise ValidationFailure("paraphrases must be non-empty strings", resp.raw)
    return list(paras)


def validate_qas(resp: GenResponse, passage: str) -> list[QAPair]:
    rows = resp.payload["qa_data"]
    if not isinstance(rows, list):
        raise ValidationFailure("qa_data must be a list", resp.raw)
    out = []
    for i, row in enumerate(rows):
        if isinstance(row, dict):
            row = (row.get("question"), row.get("answer"), row.get("cue_used_in_question", row.get("cues")))
        if not (isinstance(row, (list, tuple)) and len(row) == 3):
            raise ValidationFailure(f"qa_data[{i}] is not a (question, answer, cues) triple", resp.raw)
        q, a, cues = row
        if isinstance(cues, str):
            cues = [cues]
        if not (isinstance(q, str) and isinstance(a, str) and isinstance(cues, list)
                and all(isinstance(c, str) for c in cues)):
            raise ValidationFailure(f"qa_data[{i}] has wrongly typed fields", resp.raw)
        pair = QAPair(q, a, list(cues), "")
        try:
            pair.style = classify_style(pair, passage)
        except CorpusError as exc:
            log.warning("dropping qa_data[%d] (%s): %s", i, exc, q)
            continue
        out.append(pair)
    return out


def _require(passage: str) -> None:
    if not passage or not passage.strip():
        raise ValueError("passage must be non-empty")


def gen_same_order_paras(passage: str, client: ChatClient) -> list[str]:
    _require(passage)
    text = client.complete(GenRequest(SAME_ORDER_PROMPT.replace("{passage}", passage)))
    return validate_paraphrases(parse_payload(text, "paraphrases"))


def gen_permute_order_paras(passage: str, client: ChatClient) -> list[str]:
    _require(passage)
    text = client.complete(GenRequest(PERMUTE_ORDER_PROMPT.replace("{passage}", passage)))
    return validate_paraphrases(parse_payload(text, "paraphrases"))


def gen_qas(passage: str, client: ChatClient) -> list[QAPair]:
    _require(passage)
    text = client.complete(GenRequest(QA_PROMPT.replace("{passage}", passage)))
    return validate_qas(parse_payload(text, "qa_data"), passage)


def map_ordered(fn: Callable[[str], object], passages: Sequence[str], parallelism: int) -> list:
    """``fn`` over ``passages`` with bounded concurrency; results in input order.

    Exceptions are returned in place of results so one failure does not
    discard the rest.
    """
    def safe(p):
        try:
            return fn(p)
        except Exception as exc:  # noqa: BLE001 - reported per item
            return exc

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(safe, passages))
