"""Deterministic rule-world backend.

Synthetic rules mark their elements as ``[ELEM key=value]`` and synthetic
facts mark their attributes as ``[ATTR key=value]``. Every shipped template
starts with ``### task: <name>``; the backend dispatches on that line and
evaluates the encoded predicate exactly, so the whole pipeline runs without
a real model.

Judgment semantics for one element key:

* the rule has no such element: satisfied
* the fact has no such attribute: uncertain
* otherwise satisfied iff the values are equal
"""

import logging
import re
from typing import Callable, Dict, List, Tuple

from .backends import CompletionRequest, CompletionResult, ModelBackend
from ..core.config import ScriptedMode

logger = logging.getLogger(__name__)

TASK_PATTERN = re.compile(r"^### task: (\w+)", re.MULTILINE)
ELEM_PATTERN = re.compile(r"\[ELEM (\w+)=([\w\-]+)\]")
ATTR_PATTERN = re.compile(r"\[ATTR (\w+)=([\w\-]+)\]")
HINT_PATTERN = re.compile(r"\[HINT element=(\w+)\]")
FIELD_PATTERN = r"^{name}: *(.*)$"
TRAJECTORY_LINE = re.compile(r"^- (\w+): (satisfied|not_satisfied|uncertain)\s*$", re.MULTILINE)
LISTED_INSIGHT = re.compile(r"^\[([^\]]+)\] (.+)$", re.MULTILINE)
ASPECT_INSIGHT = re.compile(r"^ASPECT (\w+): (.+)$", re.MULTILINE)
KEY_QUESTION = re.compile(r"Is an? (.+?) an? (.+?)\? \((\w+)\)")

YES = "YES"
NO = "NO"
UNCERTAIN = "UNCERTAIN"

ELEMENT_DESCRIPTIONS = {
    "subject": "Who is capable of committing the offence.",
    "mental": "The state of mind the offender must have.",
    "object": "The social relation or interest the offence harms.",
    "conduct": "The act the offender must perform.",
}


def hint_marker(element: str) -> str:
    """Marker that lets a flawed backend judge ``element`` correctly."""
    return f"[HINT element={element}]"


def count_tokens(text: str) -> int:
    return len(text.split())


def _field(prompt: str, name: str) -> str:
    match = re.search(FIELD_PATTERN.format(name=re.escape(name)), prompt, re.MULTILINE)
    return match.group(1).strip() if match else ""


def _humanize(value: str) -> str:
    return value.replace("_", " ").replace("-", " ")


def _elements(prompt: str) -> Dict[str, str]:
    elements: Dict[str, str] = {}
    for key, value in ELEM_PATTERN.findall(prompt):
        elements.setdefault(key, value)
    return elements


def _attributes(prompt: str) -> Dict[str, str]:
    attributes: Dict[str, str] = {}
    for key, value in ATTR_PATTERN.findall(prompt):
        attributes.setdefault(key, value)
    return attributes


def element_truth(key: str, elements: Dict[str, str], attributes: Dict[str, str]) -> str:
    """Exact predicate value of one element."""
    if key not in elements:
        return YES
    if key not in attributes:
        return UNCERTAIN
    return YES if elements[key] == attributes[key] else NO


def expert_answer(question: str) -> str:
    """Rule-world answer to a key question of the form ``Is a X a Y? (key)``."""
    match = KEY_QUESTION.search(question)
    if not match:
        return "I cannot determine that from the question alone."
    attribute, element, key = match.group(1), match.group(2), match.group(3)
    if attribute == element:
        return f"Yes, a {attribute} is a {element}. {hint_marker(key)}"
    return f"No, a {attribute} is not a {element}. {hint_marker(key)}"


class ScriptedBackend(ModelBackend):
    """Rule-world backend answering by predicate evaluation.

    Holds no mutable state across calls, so it is safe under concurrent
    callers.
    """

    def __init__(
        self,
        mode: ScriptedMode = ScriptedMode.PERFECT,
        flawed_element: str = "subject",
        misdirect_reflection: bool = False
    ):
        """
        Initialize the scripted backend.

        Args:
            mode: perfect, affirmative (always answers yes) or flawed
            flawed_element: Element judged wrongly in flawed mode unless hinted
            misdirect_reflection: Make the reflector blame a correct aspect
        """
        self.mode = ScriptedMode(mode)
        self.flawed_element = flawed_element
        self.misdirect_reflection = misdirect_reflection
        self.backend_id = f"scripted:{self.mode.value}"

        self._handlers: Dict[str, Callable[[str], str]] = {
            "plan_subtasks": self._plan_subtasks,
            "canonicalize": self._canonicalize,
            "agent_role": self._agent_role,
            "subtask_judgment": self._subtask_judgment,
            "baseline_judgment": self._baseline_judgment,
            "chain_of_logic": self._chain_of_logic,
            "reflect": self._reflect,
            "insight_pair": self._insight_pair,
            "insight_success": self._insight_success,
            "insight_direct": self._insight_direct,
            "insight_filter": self._insight_filter,
            "insight_transfer": self._insight_transfer,
            "select_fact_check": self._select_fact_check,
            "key_question": self._key_question,
            "expert_answer": self._expert_answer,
        }

    def complete(self, request: CompletionRequest) -> CompletionResult:
        prompt = request.rendered_prompt
        match = TASK_PATTERN.search(prompt)
        task = match.group(1) if match else ""
        handler = self._handlers.get(task)
        text = handler(prompt) if handler else "I am not sure what is being asked."

        prompt_tokens = count_tokens(prompt) + count_tokens(request.role_preamble or "")
        return CompletionResult(
            text=text,
            prompt_tokens=prompt_tokens,
            output_tokens=count_tokens(text),
            backend_id=self.backend_id
        )

    # Judgment

    def judge_element(self, key: str, prompt: str) -> str:
        """Answer for one element under the configured mode."""
        if self.mode == ScriptedMode.AFFIRMATIVE:
            return YES
        truth = element_truth(key, _elements(prompt), _attributes(prompt))
        if self.mode == ScriptedMode.FLAWED and key == self.flawed_element:
            if key not in HINT_PATTERN.findall(prompt):
                return {YES: NO, NO: YES}.get(truth, truth)
        return truth

    def _subtask_judgment(self, prompt: str) -> str:
        label = _field(prompt, "ASPECT")
        key = label.lower()
        answer = self.judge_element(key, prompt)
        if answer == YES:
            reason = f"The fact meets the {label} element of the rule."
        elif answer == NO:
            reason = f"The fact contradicts the {label} element of the rule."
        else:
            reason = f"The fact says nothing about the {label} element."
        return f"{reason}\nANSWER: {answer}"

    def _conjunction(self, prompt: str) -> Tuple[str, List[Tuple[str, str]]]:
        answers = [(key, self.judge_element(key, prompt)) for key in _elements(prompt)]
        verdict = YES if all(a == YES for _, a in answers) else NO
        return verdict, answers

    def _baseline_judgment(self, prompt: str) -> str:
        verdict, answers = self._conjunction(prompt)
        failed = [key for key, a in answers if a != YES]
        if failed:
            reason = f"The {failed[0]} element is not established."
        else:
            reason = "Every requirement of the rule is met by the fact."
        return f"Let me reason step by step. {reason}\nANSWER: {verdict}"

    def _chain_of_logic(self, prompt: str) -> str:
        verdict, answers = self._conjunction(prompt)
        lines = [f"ELEMENT {key}: {answer}" for key, answer in answers]
        lines.append(f"ANSWER: {verdict}")
        return "\n".join(lines)

    # Planning

    def _plan_subtasks(self, prompt: str) -> str:
        elements = _elements(prompt)
        if not elements:
            return "The rule has no separable aspects."
        lines = []
        for index, key in enumerate(elements, start=1):
            description = ELEMENT_DESCRIPTIONS.get(key, f"The {key} element of the rule.")
            lines.append(f"{index}. {key.title()}: {description}")
        return "\n".join(lines)

    def _canonicalize(self, prompt: str) -> str:
        labels = re.findall(r"^- (.+)$", prompt, re.MULTILINE)
        return "\n".join(f"{label.strip()} => {label.strip().title()}" for label in labels)

    def _agent_role(self, prompt: str) -> str:
        label = _field(prompt, "LABEL")
        return (f"You are the {label} agent. Judge only whether the fact satisfies "
                f"the {label} element of the rule.")

    # Reflection and insights

    def _reflect(self, prompt: str) -> str:
        elements, attributes = _elements(prompt), _attributes(prompt)
        recorded = TRAJECTORY_LINE.findall(prompt)
        truth_to_finding = {YES: "satisfied", NO: "not_satisfied", UNCERTAIN: "uncertain"}

        wrong = [sid for sid, finding in recorded
                 if truth_to_finding[element_truth(sid, elements, attributes)] != finding]
        if self.misdirect_reflection:
            correct = [sid for sid, _ in recorded if sid not in wrong]
            wrong = correct[:1] or wrong[:1]
        if not wrong:
            return "No aspect looks wrong to me."
        return "\n".join(
            f"ERROR {sid}: the {sid} finding does not follow from the fact. {hint_marker(sid)}"
            for sid in wrong
        )

    def _insight_pair(self, prompt: str) -> str:
        subtask = _field(prompt, "SUB-TASK")
        charge = _field(prompt, "CHARGE")
        value = _attributes(prompt).get(subtask, "the described party")
        return (f"If the fact shows {_humanize(value)} for the {subtask} aspect of {charge}, "
                f"then the {subtask.title()} element is judged against that attribute directly. "
                f"{hint_marker(subtask)}")

    def _insight_success(self, prompt: str) -> str:
        charge = _field(prompt, "CHARGE")
        recorded = TRAJECTORY_LINE.findall(prompt)
        decisive = [(sid, f) for sid, f in recorded if f == "not_satisfied"] or recorded
        lines = []
        for sid, finding in decisive:
            outcome = "is satisfied" if finding == "satisfied" else "is not satisfied"
            lines.append(f"ASPECT {sid}: if the fact matches the {sid} requirement of {charge} "
                         f"as in this case, then the {sid.title()} element {outcome}. {hint_marker(sid)}")
        return "\n".join(lines)

    def _insight_direct(self, prompt: str) -> str:
        elements = _elements(prompt)
        subtask_ids = [s.strip() for s in _field(prompt, "SUB-TASK IDS").split(",") if s.strip()]
        lines = []
        for sid in subtask_ids:
            value = _humanize(elements.get(sid, sid))
            lines.append(f"ASPECT {sid}: if the rule mentions {value} then consider it carefully")
        return "\n".join(lines)

    def _insight_filter(self, prompt: str) -> str:
        kept: List[str] = []
        seen_texts = set()
        for insight_id, text in LISTED_INSIGHT.findall(prompt):
            normalized = text.strip()
            lowered = normalized.lower()
            if "if" not in lowered.split() or "then" not in lowered.replace(",", " ").split():
                continue
            if normalized in seen_texts:
                continue
            seen_texts.add(normalized)
            kept.append(insight_id)
        return f"KEEP: {', '.join(kept) if kept else 'none'}"

    def _insight_transfer(self, prompt: str) -> str:
        target = _field(prompt, "TARGET CHARGE")
        neighbor = _field(prompt, "NEIGHBOR CHARGE")
        lines = []
        for sid, text in ASPECT_INSIGHT.findall(prompt):
            adapted = text.replace(neighbor, target) if neighbor else text
            lines.append(f"ASPECT {sid}: {adapted}")
        return "\n".join(lines)

    # Knowledge feedback

    def _select_fact_check(self, prompt: str) -> str:
        checked = []
        for sid, text in ASPECT_INSIGHT.findall(prompt):
            if sid in HINT_PATTERN.findall(text) and sid not in checked:
                checked.append(sid)
        return f"CHECK: {', '.join(checked) if checked else 'none'}"

    def _key_question(self, prompt: str) -> str:
        key = _field(prompt, "ASPECT").lower()
        attribute = _attributes(prompt).get(key, "party described in the fact")
        element = _elements(prompt).get(key, key)
        return f"Is a {_humanize(attribute)} a {_humanize(element)}? ({key})"

    def _expert_answer(self, prompt: str) -> str:
        return expert_answer(_field(prompt, "QUESTION"))
