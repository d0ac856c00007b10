"""Report documents and plain-text tables."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from ..core.config import DEFAULT_TEMPLATES_DIR
from ..core.exceptions import DataError
from ..core.models import EvalReport, TrainingReport

logger = logging.getLogger(__name__)

REPORT_TEMPLATE = "report.txt.j2"


def dumps(document: Any) -> str:
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


class ReportManager:
    """Writes evaluation and training reports."""

    def __init__(self, template_dir: Optional[Union[str, Path]] = None):
        """
        Initialize the report manager.

        Args:
            template_dir: Directory holding ``report.txt.j2``; packaged templates when omitted
        """
        self.template_dir = Path(template_dir) if template_dir else DEFAULT_TEMPLATES_DIR
        if not (self.template_dir / REPORT_TEMPLATE).exists():
            logger.debug(f"No {REPORT_TEMPLATE} in {self.template_dir}; using the packaged one")
            self.template_dir = DEFAULT_TEMPLATES_DIR
        self.jinja_env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            undefined=StrictUndefined,
            keep_trailing_newline=True
        )

    def render_text(self, reports: Union[EvalReport, Sequence[EvalReport]]) -> str:
        """Plain-text table: one block per report plus a comparison table for several."""
        if isinstance(reports, EvalReport):
            reports = [reports]
        template = self.jinja_env.get_template(REPORT_TEMPLATE)
        return template.render(reports=list(reports))

    @staticmethod
    def report_document(report: EvalReport) -> Dict[str, Any]:
        return report.model_dump(mode="json")

    @staticmethod
    def report_set_document(reports: Mapping[str, EvalReport]) -> Dict[str, Any]:
        return {"reports": {label: report.model_dump(mode="json") for label, report in reports.items()}}

    def _write(self, document: Any, path: Path) -> None:
        path = Path(path)
        try:
            path.write_text(dumps(document), encoding="utf-8")
        except OSError as e:
            raise DataError(f"Cannot write report {path}: {e}")
        logger.info(f"Report written to {path}")

    def save_report(self, report: EvalReport, path: Path) -> None:
        self._write(self.report_document(report), path)

    def save_report_set(self, reports: Mapping[str, EvalReport], path: Path) -> None:
        self._write(self.report_set_document(reports), path)

    def save_training_report(self, report: TrainingReport, path: Path) -> None:
        document = report.model_dump(mode="json")
        document["unresolved"] = len(report.unresolved)
        self._write(document, path)
