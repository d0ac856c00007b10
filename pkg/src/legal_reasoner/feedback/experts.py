"""Pluggable experts that answer key questions."""

import json
import logging
import sys
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Optional, TextIO

import click

from ..core.config import OracleKind, Settings
from ..core.exceptions import BackendError, BackendUnreachableError, ConfigurationError, OracleEndOfInputError, OracleError, OracleUnreachableError
from ..gateway.gateway import ModelGateway, build_embedder
from ..gateway.backends import HttpChatBackend
from ..gateway.scripted import expert_answer
from ..gateway.templates import TemplateLibrary

logger = logging.getLogger(__name__)

EXPERT_PREAMBLE = "You are an experienced criminal-law expert. Answer questions precisely and briefly."


class ExpertAdapter(ABC):
    """An external source of legal knowledge."""

    source: str = "expert"

    def __init__(self):
        self.calls = 0
        self._calls_lock = threading.Lock()

    def answer(self, question: str) -> str:
        with self._calls_lock:
            self.calls += 1
        return self._answer(question)

    @abstractmethod
    def _answer(self, question: str) -> str:
        """Answer one question."""


class ScriptedExpert(ExpertAdapter):
    """Answers from a fixed mapping, falling back to rule-world evaluation."""

    source = "scripted"

    def __init__(self, answers: Optional[Dict[str, str]] = None):
        super().__init__()
        self.answers = dict(answers or {})

    @classmethod
    def from_file(cls, path: Path) -> "ScriptedExpert":
        try:
            answers = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read expert answers {path}: {e}")
        if not isinstance(answers, dict):
            raise ConfigurationError(f"Expert answers {path} must map questions to answers")
        return cls({str(k): str(v) for k, v in answers.items()})

    def _answer(self, question: str) -> str:
        if question in self.answers:
            return self.answers[question]
        return expert_answer(question)


class HttpModelExpert(ExpertAdapter):
    """A domain-tuned model behind its own chat-completion endpoint."""

    source = "http_model"

    def __init__(self, gateway: ModelGateway, template_name: str = "expert"):
        super().__init__()
        self.gateway = gateway
        self.template_name = template_name

    def _answer(self, question: str) -> str:
        try:
            result = self.gateway.complete_template(
                self.template_name, {"question": question}, role_preamble=EXPERT_PREAMBLE
            )
        except BackendUnreachableError as e:
            raise OracleUnreachableError(f"Expert model unreachable: {e.message}")
        except BackendError as e:
            raise OracleError(f"Expert model failed: {e.message}")
        text = result.text.strip()
        if not text:
            raise OracleError("Expert model returned an empty answer")
        return text


class ConsoleExpert(ExpertAdapter):
    """A human expert answering one line per question on a console."""

    source = "console"

    def __init__(self, input_stream: Optional[TextIO] = None, output_stream: Optional[TextIO] = None):
        super().__init__()
        self.input_stream = input_stream or sys.stdin
        self.output_stream = output_stream or sys.stderr
        self._lock = threading.Lock()

    def _answer(self, question: str) -> str:
        with self._lock:
            click.echo(f"Expert question: {question}", file=self.output_stream)
            click.echo("Answer> ", file=self.output_stream, nl=False)
            line = self.input_stream.readline()
        if not line:
            raise OracleEndOfInputError("Console expert reached end of input")
        answer = line.strip()
        if not answer:
            raise OracleError("Console expert gave an empty answer")
        return answer


def build_expert(settings: Settings, gateway: Optional[ModelGateway] = None) -> ExpertAdapter:
    """
    Adapter for the configured oracle kind.

    A model-backed expert built next to ``gateway`` records its completions
    in that gateway's usage ledger, so feedback shows up in run costs.
    """
    config = settings.oracle
    if config.kind == OracleKind.CONSOLE:
        return ConsoleExpert()
    if config.kind == OracleKind.HTTP_MODEL:
        backend = HttpChatBackend(
            endpoint=config.endpoint,
            model=config.model,
            credential_env=config.credential_env,
            request_timeout=settings.backend.request_timeout,
            retry_attempts=settings.backend.retry_attempts,
            retry_base_delay=settings.backend.retry_base_delay,
            backend_id=f"expert:{config.model}"
        )
        if gateway is not None:
            return HttpModelExpert(gateway.with_backend(backend))
        return HttpModelExpert(ModelGateway(
            backend=backend,
            templates=TemplateLibrary.load(settings.resolved_templates_dir),
            embedder=build_embedder(settings),
            temperature=settings.temperature,
            max_output_tokens=settings.max_output_tokens
        ))
    if config.answers_path:
        return ScriptedExpert.from_file(Path(config.answers_path))
    return ScriptedExpert()
