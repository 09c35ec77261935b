"""OpenAI-compatible HTTP backend.

Speaks the embeddings and chat-completions surfaces with JSON-mode
responses. Retries transport faults, timeouts, 429s and 5xx responses
with exponential backoff, at most ``max_retries`` extra attempts. The
API key comes from the environment variable named in the config and is
never written to logs or error messages.
"""

from __future__ import annotations

import json
import os
import time

from ..core import Embedding
from ..errors import ProviderError
from .base import (
    InstanceProposal,
    Provider,
    ProviderConfig,
    ROLE_CHAT,
    ROLE_IMAGE,
    ROLE_MULTIMODAL,
    ROLE_TEXT,
    check_proposal_scores,
    check_relevance_scores,
    load_prompt,
)

_BACKOFF_BASE = 0.5
_RETRYABLE_STATUSES = frozenset({429} | set(range(500, 600)))


class _HttpxTransport:
    """Thin callable wrapper so tests can substitute a fake transport."""

    def __init__(self, timeout: float):
        import httpx

        self._client = httpx.Client(timeout=timeout)
        self._errors = httpx.TransportError
        self._timeouts = httpx.TimeoutException

    def __call__(self, url: str, headers: dict, body: dict):
        import httpx

        try:
            response = self._client.post(url, headers=headers, json=body)
        except httpx.TimeoutException as exc:
            raise TimeoutError(str(exc)) from exc
        except httpx.TransportError as exc:
            raise ConnectionError(str(exc)) from exc
        try:
            payload = response.json()
        except ValueError:
            payload = {"raw": response.text}
        return response.status_code, payload


class HttpProvider(Provider):
    """Client for OpenAI-compatible gateways.

    ``transport`` is a callable ``(url, headers, body) -> (status, dict)``
    that may raise TimeoutError or ConnectionError; ``sleeper`` is called
    with the backoff delay between attempts. Both exist for tests.
    """

    def __init__(self, config: ProviderConfig, transport=None, sleeper=time.sleep):
        if not config.endpoint_url:
            raise ProviderError(
                ProviderError.TRANSPORT, "http backend needs endpoint_url"
            )
        self.config = config
        self._transport = transport or _HttpxTransport(config.timeout)
        self._sleep = sleeper

    # -- plumbing --------------------------------------------------------

    def _headers(self) -> dict:
        key = os.environ.get(self.config.api_key_env_var, "")
        if not key:
            raise ProviderError(
                ProviderError.AUTH,
                f"environment variable {self.config.api_key_env_var} is not set",
            )
        return {"Authorization": f"Bearer {key}"}

    def _model(self, role: str) -> str:
        name = self.config.model_names.get(role, "")
        if not name:
            raise ProviderError(
                ProviderError.UNSUPPORTED_OPERATION,
                f"no model configured for role {role!r}",
            )
        return name

    def _post(self, url: str, body: dict) -> dict:
        headers = self._headers()
        attempts = self.config.max_retries + 1
        last_kind = ProviderError.TRANSPORT
        last_msg = "request failed"
        for attempt in range(attempts):
            try:
                status, payload = self._transport(url, headers, body)
            except TimeoutError as exc:
                last_kind, last_msg = ProviderError.TIMEOUT, str(exc)
            except ConnectionError as exc:
                last_kind, last_msg = ProviderError.TRANSPORT, str(exc)
            else:
                if status == 200:
                    return payload
                if status in (401, 403):
                    raise ProviderError(ProviderError.AUTH, f"http {status}")
                if status not in _RETRYABLE_STATUSES:
                    raise ProviderError(ProviderError.TRANSPORT, f"http {status}")
                last_kind = (
                    ProviderError.RATE_LIMIT if status == 429 else ProviderError.TRANSPORT
                )
                last_msg = f"http {status}"
            if attempt + 1 < attempts:
                self._sleep(_BACKOFF_BASE * (2.0 ** attempt))
        raise ProviderError(last_kind, f"{last_msg} after {attempts} attempts")

    def _embed(self, role: str, text: str) -> Embedding:
        url = f"{self.config.endpoint_url.rstrip('/')}/embeddings"
        payload = self._post(url, {"model": self._model(role), "input": text})
        try:
            values = payload["data"][0]["embedding"]
            return Embedding(values)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"unexpected embeddings response: {exc}",
                payload=payload,
            ) from exc

    def _chat_json(self, prompt: str) -> dict:
        url = f"{self.config.endpoint_url.rstrip('/')}/chat/completions"
        body = {
            "model": self._model(ROLE_CHAT),
            "messages": [{"role": "user", "content": prompt}],
            "response_format": {"type": "json_object"},
            "temperature": 0,
        }
        payload = self._post(url, body)
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"unexpected chat response shape: {exc}",
                payload=payload,
            ) from exc
        try:
            return json.loads(content)
        except json.JSONDecodeError as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"chat response is not JSON: {exc}",
                payload=content,
            ) from exc

    # -- operations ------------------------------------------------------

    def embed_text(self, text: str) -> Embedding:
        if not text:
            raise ProviderError(ProviderError.EMPTY_INPUT, "empty text")
        return self._embed(ROLE_TEXT, text)

    def embed_query_multimodal(self, text: str) -> Embedding:
        if not text:
            raise ProviderError(ProviderError.EMPTY_INPUT, "empty text")
        return self._embed(ROLE_MULTIMODAL, text)

    def embed_image_multimodal(self, image_ref: str) -> Embedding:
        if not self.config.image_embeddings_url:
            raise ProviderError(
                ProviderError.UNSUPPORTED_OPERATION,
                "no image embedding endpoint configured",
            )
        payload = self._post(
            self.config.image_embeddings_url,
            {"model": self._model(ROLE_IMAGE), "input": image_ref},
        )
        try:
            return Embedding(payload["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"unexpected embeddings response: {exc}",
                payload=payload,
            ) from exc

    def describe_view(self, image_ref: str) -> str:
        prompt = load_prompt("describe_view").format(
            image_ref=image_ref, embodiment=self.config.embodiment
        )
        data = self._chat_json(prompt)
        description = data.get("description")
        if not isinstance(description, str) or not description:
            raise ProviderError(
                ProviderError.PARSE_FAILURE, "missing description field", payload=data
            )
        return description

    def propose_instances(self, image_ref, masks) -> list[InstanceProposal]:
        mask_lines = "\n".join(
            f"- mask {m.mask_id}: bbox={m.bbox} area={m.area_px}px" for m in masks
        )
        prompt = load_prompt("propose_instances").format(
            image_ref=image_ref, candidates=mask_lines, embodiment=self.config.embodiment
        )
        data = self._chat_json(prompt)
        try:
            proposals = [
                InstanceProposal(
                    mask_id=int(p["mask_id"]),
                    description=str(p["description"]),
                    affordances=tuple(
                        (str(a["action"]), float(a["score"])) for a in p["affordances"]
                    ),
                )
                for p in data["proposals"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"malformed proposals: {exc}",
                payload=data,
            ) from exc
        check_proposal_scores(proposals, "http")
        return proposals

    def summarize(self, descriptions) -> str:
        descriptions = list(descriptions)
        if not descriptions:
            raise ProviderError(ProviderError.EMPTY_INPUT, "nothing to summarize")
        prompt = load_prompt("summarize").format(
            candidates="\n".join(f"- {d}" for d in descriptions)
        )
        data = self._chat_json(prompt)
        summary = data.get("summary")
        if not isinstance(summary, str) or not summary:
            raise ProviderError(
                ProviderError.PARSE_FAILURE, "missing summary field", payload=data
            )
        return summary

    def score_instances(self, phrase, candidates) -> list[tuple[str, float]]:
        candidates = list(candidates)
        if not candidates:
            raise ProviderError(ProviderError.EMPTY_INPUT, "no candidates to score")
        lines = "\n".join(f"- id={cid}: {desc}" for cid, desc in candidates)
        prompt = load_prompt("score_instances").format(
            instruction=phrase, candidates=lines, embodiment=self.config.embodiment
        )
        data = self._chat_json(prompt)
        try:
            by_id = {str(s["id"]): float(s["score"]) for s in data["scores"]}
            scores = [(cid, by_id[cid]) for cid, _ in candidates]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"malformed scores: {exc}",
                payload=data,
            ) from exc
        check_relevance_scores(scores, "http")
        return scores

    def decompose_instruction(self, instruction: str) -> tuple[str, str]:
        prompt = load_prompt("decompose_instruction").format(instruction=instruction)
        data = self._chat_json(prompt)
        target = data.get("target")
        receptacle = data.get("receptacle")
        if not target or not receptacle:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                "decomposition needs target and receptacle",
                payload=data,
            )
        return str(target), str(receptacle)
