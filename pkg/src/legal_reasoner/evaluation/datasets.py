"""Case files: one JSON record per line."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from ..core.exceptions import CaseValidationError, DataError
from ..core.models import CaseRecord, ChargeQuery, FactDescription, TrainingPair
from ..core.validation import validate_case
from ..knowledge.rule_kb import RuleKB

logger = logging.getLogger(__name__)


def record_from_json(data: Any) -> CaseRecord:
    """Build a CaseRecord from ``{id, fact, queries: [{charge, expected}], pair_tag}``."""
    if not isinstance(data, dict):
        raise ValueError("record must be a JSON object")
    missing = [key for key in ("id", "fact", "queries") if key not in data]
    if missing:
        raise ValueError(f"missing fields {missing}")
    if not isinstance(data["queries"], list):
        raise ValueError("queries must be a list")

    queries = []
    for query in data["queries"]:
        if not isinstance(query, dict) or "charge" not in query or "expected" not in query:
            raise ValueError("each query needs 'charge' and 'expected'")
        if not isinstance(query["expected"], bool):
            raise ValueError(f"expected must be a boolean for charge {query['charge']!r}")
        queries.append(ChargeQuery(charge_name=str(query["charge"]), expected_guilty=query["expected"]))

    return CaseRecord(
        fact=FactDescription(case_id=str(data["id"]), text=str(data["fact"])),
        queries=tuple(queries),
        pair_tag=data.get("pair_tag")
    )


def record_to_json(record: CaseRecord) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "id": record.case_id,
        "fact": record.fact.text,
        "queries": [{"charge": q.charge_name, "expected": q.expected_guilty} for q in record.queries],
    }
    if record.pair_tag is not None:
        document["pair_tag"] = record.pair_tag
    return document


def load_cases(path: Path, rules: Optional[RuleKB] = None) -> List[CaseRecord]:
    """
    Load and validate a case file.

    Every violation is collected with its line number before the load fails.

    Args:
        path: Case file, one JSON record per line
        rules: When given, every query charge must resolve against it

    Returns:
        Validated case records in file order
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"Cannot read case file {path}: {e}")
    except UnicodeDecodeError as e:
        raise DataError(f"Case file {path} is not UTF-8 text: {e}")

    records: List[CaseRecord] = []
    violations: List[str] = []
    seen_ids = set()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = record_from_json(json.loads(line))
        except json.JSONDecodeError as e:
            violations.append(f"line {line_number}: invalid JSON ({e.msg})")
            continue
        except (ValueError, ValidationError) as e:
            violations.append(f"line {line_number}: {e}")
            continue

        if rules is not None:
            result = validate_case(record, rules)
            violations.extend(f"line {line_number}: {error}" for error in result.errors)
            for warning in result.warnings:
                logger.debug(f"{path}:{line_number}: {warning}")
        if record.case_id in seen_ids:
            violations.append(f"line {line_number}: duplicate case id {record.case_id}")
        seen_ids.add(record.case_id)
        records.append(record)

    if violations:
        raise CaseValidationError(violations, details={"path": str(path)})
    logger.info(f"Loaded {len(records)} cases from {path}")
    return records


def save_cases(records: Sequence[CaseRecord], path: Path) -> None:
    """Write records one per line."""
    path = Path(path)
    try:
        path.write_text(
            "".join(json.dumps(record_to_json(r), ensure_ascii=False) + "\n" for r in records),
            encoding="utf-8"
        )
    except OSError as e:
        raise DataError(f"Cannot write case file {path}: {e}")


def training_pairs(records: Sequence[CaseRecord]) -> List[TrainingPair]:
    """(golden, confusing) pairs of every two-query record with one guilty and one innocent query."""
    pairs = []
    for record in records:
        golden = [q.charge_name for q in record.queries if q.expected_guilty]
        confusing = [q.charge_name for q in record.queries if not q.expected_guilty]
        if len(golden) != 1 or not confusing:
            logger.debug(f"Case {record.case_id} is not a confusing-charge pair; skipped for training")
            continue
        for confusing_charge in confusing:
            pairs.append(TrainingPair(fact=record.fact, golden=golden[0], confusing=confusing_charge,
                                      pair_tag=record.pair_tag))
    return pairs


def planner_samples(records: Sequence[CaseRecord]) -> Tuple[Tuple[CaseRecord, str], ...]:
    """One (case, golden charge) sample per record that has a golden charge."""
    samples = []
    for record in records:
        golden = [q.charge_name for q in record.queries if q.expected_guilty]
        if golden:
            samples.append((record, golden[0]))
    return tuple(samples)
