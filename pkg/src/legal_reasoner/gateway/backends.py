"""Completion backends: request/result types and the HTTP chat client."""

import logging
import os
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

import backoff
import httpx
from pydantic import BaseModel, ConfigDict, Field
from pydantic.types import confloat, conint

from ..core.exceptions import BackendError, BackendUnreachableError, MalformedResponseError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS_CODES = {408, 429, 500, 502, 503, 504}


class Decoding(BaseModel):
    """Decoding parameters of a completion."""
    model_config = ConfigDict(frozen=True)

    temperature: confloat(ge=0.0) = 0.0
    max_output_tokens: conint(ge=1) = 512


class CompletionRequest(BaseModel):
    """A rendered prompt ready for a backend."""
    model_config = ConfigDict(frozen=True)

    rendered_prompt: str
    role_preamble: Optional[str] = None
    decoding: Decoding = Field(default_factory=Decoding)

    def messages(self) -> List[Dict[str, str]]:
        messages = []
        if self.role_preamble:
            messages.append({"role": "system", "content": self.role_preamble})
        messages.append({"role": "user", "content": self.rendered_prompt})
        return messages


class CompletionResult(BaseModel):
    """Model output plus token usage."""
    model_config = ConfigDict(frozen=True)

    text: str
    prompt_tokens: conint(ge=0) = 0
    output_tokens: conint(ge=0) = 0
    backend_id: str


class ModelBackend(ABC):
    """A reentrant completion backend."""

    backend_id: str = "backend"

    @abstractmethod
    def complete(self, request: CompletionRequest) -> CompletionResult:
        """Run one completion."""

    def close(self) -> None:
        """Release transport resources."""


class _RetryableStatus(Exception):
    def __init__(self, response: httpx.Response):
        self.response = response
        super().__init__(f"HTTP {response.status_code}")


def _log_backoff(details: Dict[str, Any]) -> None:
    logger.warning(f"Backend retry: attempt {details['tries']} failed ({details['exception']}); "
                   f"waiting {details['wait']:.2f}s")


class HttpChatBackend(ModelBackend):
    """OpenAI-compatible ``/chat/completions`` client with bounded retries."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env: str = "MALR_API_KEY",
        request_timeout: float = 60.0,
        retry_attempts: int = 3,
        retry_base_delay: float = 0.5,
        client: Optional[httpx.Client] = None,
        backend_id: Optional[str] = None
    ):
        """
        Initialize the HTTP backend.

        Args:
            endpoint: Base URL of the chat-completion API
            model: Model name sent with each request
            credential_env: Environment variable holding the API key
            request_timeout: Per-request timeout in seconds
            retry_attempts: Total attempts before giving up
            retry_base_delay: Base of the exponential backoff in seconds
            client: Optional preconfigured httpx client (tests inject a mock transport)
            backend_id: Identifier reported in completion results
        """
        self.url = f"{endpoint.rstrip('/')}/chat/completions"
        self.model = model
        self.retry_attempts = retry_attempts
        self.retry_base_delay = retry_base_delay
        self.backend_id = backend_id or f"http:{model}"

        headers = {}
        api_key = os.environ.get(credential_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = client or httpx.Client(timeout=request_timeout)
        self._headers = headers

    def close(self) -> None:
        self._client.close()

    def _post(self, payload: Dict[str, Any]) -> httpx.Response:
        response = self._client.post(self.url, json=payload, headers=self._headers)
        if response.status_code in RETRYABLE_STATUS_CODES:
            raise _RetryableStatus(response)
        return response

    def complete(self, request: CompletionRequest) -> CompletionResult:
        payload = {
            "model": self.model,
            "messages": request.messages(),
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_output_tokens,
        }

        post = backoff.on_exception(
            backoff.expo,
            (httpx.TransportError, _RetryableStatus),
            max_tries=self.retry_attempts,
            factor=self.retry_base_delay,
            jitter=backoff.full_jitter,
            on_backoff=_log_backoff
        )(self._post)

        try:
            response = post(payload)
        except (httpx.TransportError, _RetryableStatus) as e:
            raise BackendUnreachableError(
                f"Backend {self.url} unreachable after {self.retry_attempts} attempts: {e}"
            )

        if response.status_code >= 400:
            raise BackendError(
                f"Backend {self.url} rejected the request with HTTP {response.status_code}",
                details={"body": response.text[:2000]}
            )
        return self._parse_response(response)

    def _parse_response(self, response: httpx.Response) -> CompletionResult:
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
            if not isinstance(text, str):
                raise TypeError("content is not text")
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise MalformedResponseError(f"Malformed chat-completion response: {e}", raw_payload=response.text)

        usage = data.get("usage") or {}
        return CompletionResult(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0) or 0),
            output_tokens=int(usage.get("completion_tokens", 0) or 0),
            backend_id=self.backend_id
        )
