"""Single seam for completions, embeddings and prompt rendering."""

import logging
import threading
from typing import Mapping, Optional

from pydantic import BaseModel, ConfigDict

from .backends import CompletionRequest, CompletionResult, Decoding, HttpChatBackend, ModelBackend
from .embeddings import Embedder, EmbeddingVector, HttpEmbedder, TrigramEmbedder
from .scripted import ScriptedBackend
from .templates import TemplateLibrary
from ..core.config import BackendKind, EmbedderKind, Settings

logger = logging.getLogger(__name__)


class UsageSnapshot(BaseModel):
    """Token totals at one point in time."""
    model_config = ConfigDict(frozen=True)

    prompt_tokens: int = 0
    output_tokens: int = 0
    completions: int = 0

    def since(self, earlier: "UsageSnapshot") -> "UsageSnapshot":
        return UsageSnapshot(
            prompt_tokens=self.prompt_tokens - earlier.prompt_tokens,
            output_tokens=self.output_tokens - earlier.output_tokens,
            completions=self.completions - earlier.completions
        )


class UsageLedger:
    """Thread-safe running totals of every completion."""

    def __init__(self):
        self._lock = threading.Lock()
        self._prompt_tokens = 0
        self._output_tokens = 0
        self._completions = 0

    def record(self, result: CompletionResult) -> None:
        with self._lock:
            self._prompt_tokens += result.prompt_tokens
            self._output_tokens += result.output_tokens
            self._completions += 1

    def snapshot(self) -> UsageSnapshot:
        with self._lock:
            return UsageSnapshot(
                prompt_tokens=self._prompt_tokens,
                output_tokens=self._output_tokens,
                completions=self._completions
            )


class ModelGateway:
    """Renders templates, calls the backend and records usage."""

    def __init__(
        self,
        backend: ModelBackend,
        templates: TemplateLibrary,
        embedder: Optional[Embedder] = None,
        temperature: float = 0.0,
        max_output_tokens: int = 512,
        ledger: Optional[UsageLedger] = None
    ):
        """
        Initialize the gateway.

        Args:
            backend: Completion backend
            templates: Prompt template library
            embedder: Text embedder; defaults to the trigram fallback
            temperature: Decoding temperature for every completion
            max_output_tokens: Output token cap for every completion
            ledger: Usage ledger to record into; shared when several gateways feed one cost report
        """
        self.backend = backend
        self.templates = templates
        self.embedder = embedder or TrigramEmbedder()
        self.decoding = Decoding(temperature=temperature, max_output_tokens=max_output_tokens)
        self.ledger = ledger or UsageLedger()

    def complete(self, request: CompletionRequest) -> CompletionResult:
        result = self.backend.complete(request)
        self.ledger.record(result)
        logger.debug(f"{result.backend_id}: {result.prompt_tokens} prompt / {result.output_tokens} output tokens")
        return result

    def render(self, template_name: str, bindings: Mapping[str, str]) -> str:
        return self.templates.render(template_name, bindings)

    def complete_template(
        self,
        template_name: str,
        bindings: Mapping[str, str],
        role_preamble: Optional[str] = None
    ) -> CompletionResult:
        """Render a named template and complete it."""
        prompt = self.render(template_name, bindings)
        request = CompletionRequest(rendered_prompt=prompt, role_preamble=role_preamble, decoding=self.decoding)
        return self.complete(request)

    def embed(self, text: str) -> EmbeddingVector:
        return self.embedder.embed(text)

    def with_backend(self, backend: ModelBackend) -> "ModelGateway":
        """Gateway over another backend that records into this gateway's ledger."""
        return ModelGateway(
            backend=backend,
            templates=self.templates,
            embedder=self.embedder,
            temperature=self.decoding.temperature,
            max_output_tokens=self.decoding.max_output_tokens,
            ledger=self.ledger
        )

    def close(self) -> None:
        self.backend.close()


def build_backend(settings: Settings) -> ModelBackend:
    config = settings.backend
    if config.kind == BackendKind.HTTP:
        return HttpChatBackend(
            endpoint=config.endpoint,
            model=config.model,
            credential_env=config.credential_env,
            request_timeout=config.request_timeout,
            retry_attempts=config.retry_attempts,
            retry_base_delay=config.retry_base_delay
        )
    return ScriptedBackend(
        mode=config.scripted_mode,
        flawed_element=config.flawed_element,
        misdirect_reflection=config.misdirect_reflection
    )


def build_embedder(settings: Settings) -> Embedder:
    config = settings.embedder
    if config.kind == EmbedderKind.HTTP:
        return HttpEmbedder(
            endpoint=config.endpoint,
            model=config.model,
            credential_env=settings.backend.credential_env,
            request_timeout=settings.backend.request_timeout,
            retry_attempts=settings.backend.retry_attempts,
            retry_base_delay=settings.backend.retry_base_delay
        )
    return TrigramEmbedder(dim=config.dim)


def build_gateway(settings: Settings, backend: Optional[ModelBackend] = None) -> ModelGateway:
    """Assemble a gateway from settings; an explicit backend overrides the configured one."""
    return ModelGateway(
        backend=backend or build_backend(settings),
        templates=TemplateLibrary.load(settings.resolved_templates_dir),
        embedder=build_embedder(settings),
        temperature=settings.temperature,
        max_output_tokens=settings.max_output_tokens
    )
