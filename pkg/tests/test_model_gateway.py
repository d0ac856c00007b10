"""Tests for prompt templates, completion backends, embedders and the usage ledger."""

import json
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
from hypothesis import given, settings, strategies as st

from legal_reasoner.core.config import DEFAULT_TEMPLATES_DIR, ScriptedMode
from legal_reasoner.core.exceptions import (
    BackendError, BackendUnreachableError, EmbeddingError, MalformedResponseError, MissingSlotError,
    TemplateError
)
from legal_reasoner.gateway.backends import CompletionRequest, HttpChatBackend
from legal_reasoner.gateway.embeddings import EmbeddingVector, HttpEmbedder, TrigramEmbedder, cosine_similarity
from legal_reasoner.gateway.scripted import ScriptedBackend, count_tokens, element_truth, expert_answer
from legal_reasoner.gateway.templates import PromptTemplate, TemplateLibrary, render

SHIPPED_TEMPLATES = {
    "agent_role", "canonicalizer", "chain_of_logic", "expert", "fact_check_selector", "fs_cot",
    "fs_prompt", "insight_direct", "insight_filter", "insight_pair", "insight_success",
    "insight_transfer", "key_question", "lrp", "planner", "reflector", "subtask_agent", "zs_cot",
}

RULE = ("Offence 01A is committed when the offender is state functionary [ELEM subject=state_functionary]; "
        "the offender acts with direct intent [ELEM mental=direct_intent].")
FACT_MATCH = ("The defendant was state functionary [ATTR subject=state_functionary], "
              "acted with direct intent [ATTR mental=direct_intent], in the morning.")
FACT_MISMATCH = ("The defendant was private citizen [ATTR subject=private_citizen], "
                 "acted with direct intent [ATTR mental=direct_intent], in the morning.")


def judgment_prompt(label: str, fact: str, extra: str = "") -> str:
    return f"### task: subtask_judgment\nASPECT: {label}\nRule:\n{RULE}\nFact:\n{fact}\n{extra}"


def complete(backend, prompt: str) -> str:
    return backend.complete(CompletionRequest(rendered_prompt=prompt)).text


class TestTemplates:
    """Slot rendering and the template library."""

    def test_render_substitutes_every_occurrence(self):
        template = PromptTemplate.from_body("t", "{a} and {a} with {b}")
        assert render(template, {"a": "x", "b": "y"}) == "x and x with y"

    def test_missing_slot(self):
        template = PromptTemplate.from_body("t", "{a} {b}")
        with pytest.raises(MissingSlotError) as excinfo:
            render(template, {"a": "x"})
        assert excinfo.value.slot == "b"

    def test_bound_values_are_not_rescanned(self):
        template = PromptTemplate.from_body("t", "{a}")
        assert render(template, {"a": "{b}"}) == "{b}"

    def test_declared_slot_must_occur_in_body(self):
        with pytest.raises(ValueError):
            PromptTemplate(name="t", body="no slots", required_slots=frozenset({"a"}))

    def test_library_loads_every_shipped_template(self):
        library = TemplateLibrary.load(DEFAULT_TEMPLATES_DIR)
        assert SHIPPED_TEMPLATES <= set(library.names())
        for name in SHIPPED_TEMPLATES:
            assert library.get(name).body.startswith("### task: ")

    def test_optional_slots_render_empty(self):
        library = TemplateLibrary.load(DEFAULT_TEMPLATES_DIR)
        prompt = library.render("subtask_agent", {
            "role": "r", "subtask": "Subject", "description": "d", "charge": "A", "rule": "rule", "fact": "fact",
        })
        assert "{insights}" not in prompt
        assert "ASPECT: Subject" in prompt

    def test_unknown_template_and_directory(self, tmp_path):
        with pytest.raises(TemplateError):
            TemplateLibrary.load(DEFAULT_TEMPLATES_DIR).get("nope")
        with pytest.raises(TemplateError):
            TemplateLibrary.load(tmp_path / "missing")


class TestScriptedBackend:
    """Rule-world predicate evaluation."""

    def test_element_truth(self):
        elements = {"subject": "a"}
        assert element_truth("subject", elements, {"subject": "a"}) == "YES"
        assert element_truth("subject", elements, {"subject": "b"}) == "NO"
        assert element_truth("subject", elements, {}) == "UNCERTAIN"
        assert element_truth("object", elements, {}) == "YES"

    def test_perfect_judgment(self):
        backend = ScriptedBackend(ScriptedMode.PERFECT)
        assert complete(backend, judgment_prompt("Subject", FACT_MATCH)).endswith("ANSWER: YES")
        assert complete(backend, judgment_prompt("Subject", FACT_MISMATCH)).endswith("ANSWER: NO")

    def test_affirmative_always_yes(self):
        backend = ScriptedBackend(ScriptedMode.AFFIRMATIVE)
        assert complete(backend, judgment_prompt("Subject", FACT_MISMATCH)).endswith("ANSWER: YES")

    def test_flawed_element_flips_unless_hinted(self):
        backend = ScriptedBackend(ScriptedMode.FLAWED, flawed_element="subject")
        assert complete(backend, judgment_prompt("Subject", FACT_MATCH)).endswith("ANSWER: NO")
        assert complete(backend, judgment_prompt("Mental", FACT_MATCH)).endswith("ANSWER: YES")
        hinted = judgment_prompt("Subject", FACT_MATCH, "- note [HINT element=subject]")
        assert complete(backend, hinted).endswith("ANSWER: YES")

    def test_reflection_names_wrong_aspect(self):
        backend = ScriptedBackend(ScriptedMode.FLAWED)
        prompt = (f"### task: reflect\nRule:\n{RULE}\nFact:\n{FACT_MATCH}\n"
                  "TRAJECTORY:\n- mental: satisfied\n- subject: not_satisfied\n")
        assert complete(backend, prompt).startswith("ERROR subject:")

    def test_misdirected_reflection_names_a_correct_aspect(self):
        backend = ScriptedBackend(ScriptedMode.FLAWED, misdirect_reflection=True)
        prompt = (f"### task: reflect\nRule:\n{RULE}\nFact:\n{FACT_MATCH}\n"
                  "TRAJECTORY:\n- mental: satisfied\n- subject: not_satisfied\n")
        assert complete(backend, prompt).startswith("ERROR mental:")

    def test_filter_drops_duplicates_and_non_conditionals(self):
        backend = ScriptedBackend()
        prompt = ("### task: insight_filter\nINSIGHTS:\n"
                  "[a] If x, then y.\n[b] If x, then y.\n[c] Plain statement.\n[d] If z then w.\n")
        assert complete(backend, prompt) == "KEEP: a, d"

    def test_expert_answer(self):
        assert expert_answer("Is a bank clerk a bank clerk? (subject)").startswith("Yes")
        assert expert_answer("Is a bank clerk a state functionary? (subject)").startswith("No")
        assert "[HINT element=subject]" in expert_answer("Is a bank clerk a bank clerk? (subject)")

    def test_unknown_task_still_answers(self):
        result = ScriptedBackend().complete(CompletionRequest(rendered_prompt="hello"))
        assert result.text
        assert result.prompt_tokens == 1
        assert result.output_tokens == count_tokens(result.text)


class TestGatewayLedger:
    """Usage accounting on the gateway."""

    def test_ledger_sums_every_completion(self, perfect_gateway):
        results = [
            perfect_gateway.complete_template("expert", {"question": f"Is a clerk a clerk? (subject) {i}"})
            for i in range(5)
        ]
        snapshot = perfect_gateway.ledger.snapshot()
        assert snapshot.completions == 5
        assert snapshot.prompt_tokens == sum(r.prompt_tokens for r in results)
        assert snapshot.output_tokens == sum(r.output_tokens for r in results)

    def test_ledger_is_thread_safe(self, perfect_gateway):
        def call(i):
            return perfect_gateway.complete_template("expert", {"question": f"q{i}"})

        with ThreadPoolExecutor(max_workers=8) as executor:
            results = list(executor.map(call, range(64)))
        snapshot = perfect_gateway.ledger.snapshot()
        assert snapshot.completions == 64
        assert snapshot.prompt_tokens == sum(r.prompt_tokens for r in results)

    def test_snapshot_delta(self, perfect_gateway):
        before = perfect_gateway.ledger.snapshot()
        perfect_gateway.complete_template("expert", {"question": "q"})
        delta = perfect_gateway.ledger.snapshot().since(before)
        assert delta.completions == 1


class TestHttpChatBackend:
    """OpenAI-style chat client over a mock transport."""

    @staticmethod
    def backend(handler, monkeypatch=None, attempts=3) -> HttpChatBackend:
        client = httpx.Client(transport=httpx.MockTransport(handler))
        return HttpChatBackend("http://model.test/v1", "m", retry_attempts=attempts, retry_base_delay=0.0,
                               client=client)

    def test_parses_completion_and_usage(self, monkeypatch):
        monkeypatch.setenv("MALR_API_KEY", "secret")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("Authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "ANSWER: YES"}}],
                "usage": {"prompt_tokens": 12, "completion_tokens": 3},
            })

        result = self.backend(handler).complete(CompletionRequest(rendered_prompt="p", role_preamble="sys"))
        assert result.text == "ANSWER: YES"
        assert (result.prompt_tokens, result.output_tokens) == (12, 3)
        assert seen["auth"] == "Bearer secret"
        assert seen["body"]["messages"][0] == {"role": "system", "content": "sys"}

    def test_retries_then_unreachable(self):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(503)

        with pytest.raises(BackendUnreachableError):
            self.backend(handler).complete(CompletionRequest(rendered_prompt="p"))
        assert len(calls) == 3

    def test_transport_error_retried(self):
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) < 2:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        result = self.backend(handler).complete(CompletionRequest(rendered_prompt="p"))
        assert result.text == "ok"
        assert len(calls) == 2

    def test_client_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(400, text="bad request")

        with pytest.raises(BackendError):
            self.backend(handler).complete(CompletionRequest(rendered_prompt="p"))
        assert len(calls) == 1

    def test_malformed_payload(self):
        def handler(request):
            return httpx.Response(200, json={"choices": []})

        with pytest.raises(MalformedResponseError) as excinfo:
            self.backend(handler).complete(CompletionRequest(rendered_prompt="p"))
        assert excinfo.value.raw_payload


class TestEmbeddings:
    """Trigram fallback embedder and cosine similarity."""

    def test_trigram_is_deterministic(self):
        embedder = TrigramEmbedder(dim=64)
        assert embedder.embed("Theft of public property") == embedder.embed("Theft  of public property")

    def test_self_similarity_is_one(self):
        vector = TrigramEmbedder().embed("bribe acceptance by a state functionary")
        assert cosine_similarity(vector, vector) == pytest.approx(1.0)

    @given(st.text(min_size=1, max_size=80).filter(lambda s: s.strip()),
           st.text(min_size=1, max_size=80).filter(lambda s: s.strip()))
    @settings(max_examples=50)
    def test_cosine_is_bounded_and_symmetric(self, a, b):
        embedder = TrigramEmbedder(dim=32)
        u, v = embedder.embed(a), embedder.embed(b)
        assert -1.0 <= cosine_similarity(u, v) <= 1.0
        assert cosine_similarity(u, v) == pytest.approx(cosine_similarity(v, u))

    def test_empty_text_and_dimension_mismatch(self):
        with pytest.raises(EmbeddingError):
            TrigramEmbedder().embed("   ")
        with pytest.raises(EmbeddingError):
            cosine_similarity(EmbeddingVector(values=[1.0], dim=1), EmbeddingVector(values=[1.0, 0.0], dim=2))

    def test_zero_vector(self):
        with pytest.raises(EmbeddingError):
            cosine_similarity(EmbeddingVector(values=[0.0, 0.0], dim=2), EmbeddingVector(values=[1.0, 0.0], dim=2))

    def test_http_embedder(self):
        def handler(request):
            return httpx.Response(200, json={"data": [{"embedding": [0.1, 0.2, 0.3]}]})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        vector = HttpEmbedder("http://embed.test/v1", "e", retry_base_delay=0.0, client=client).embed("text")
        assert vector.dim == 3
