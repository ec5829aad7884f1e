"""
Self-contained JSON reports.

Each report embeds the problem document, the profiles it judged and every
blocking certificate it issued, so `verify` can re-check certificates by
direct recomputation with no other input. Files are written atomically:
a temporary file in the target directory is renamed into place.
"""
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np

from blocking import BlockingCertificate, verify_certificate
from errors import InterimCoreError, ProblemFileError
from games import Problem, Profile
from problem_file import dump_problem, problem_from_dict
from utils import ConfigManager

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """json.dumps fallback for numpy scalars and arrays."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


@dataclass(slots=True)
class Report:
    """Command echo, parameters, verdicts, certificates and timing."""
    command: str
    parameters: dict[str, Any]
    problem: dict[str, Any]
    verdicts: list[dict[str, Any]] = field(default_factory=list)
    certificates: list[dict[str, Any]] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)
    exit_status: int = 0
    created: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))

    @classmethod
    def start(cls, command: str, problem: Problem, **parameters: Any) -> 'Report':
        return cls(command, parameters, dump_problem(problem))

    def add_certificate(self, problem: Problem, x: Profile, certificate: BlockingCertificate) -> int:
        """Embed a certificate with the profile it blocks; returns its index."""
        self.certificates.append({
            'profile': x.to_lists(),
            'description': certificate.describe(problem),
            'certificate': certificate.to_dict(problem),
        })
        return len(self.certificates) - 1

    def to_json(self, indent: int | None = None) -> str:
        indent = ConfigManager.value_or(indent, 'output_options', 'json_indent')
        return json.dumps(asdict(self), indent=indent, default=_plain, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> 'Report':
        try:
            data = json.loads(text)
            return cls(**data)
        except (json.JSONDecodeError, TypeError) as e:
            raise ProblemFileError(f"malformed report: {e}") from e

    def summary_lines(self) -> list[str]:
        lines = [f"{self.command}: exit status {self.exit_status}"]
        lines.extend(str(v.get('summary', v)) for v in self.verdicts)
        lines.extend(f"certificate {k}: {c['description']}" for k, c in enumerate(self.certificates))
        return lines


def write_report(report: Report, path: Path | str) -> Path:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = report.to_json()
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(payload)
            f.write('\n')
        os.replace(tmp, path)
    except OSError:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug(f"report written to {path}")
    return path


def read_report(path: Path | str) -> Report:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ProblemFileError(f"cannot read report {path}: {e}") from e
    return Report.from_json(text)


@dataclass(slots=True)
class CertificateCheck:
    index: int
    description: str
    valid: bool
    reason: str = ''


def verify_report(report: Report) -> list[CertificateCheck]:
    """Re-check every embedded certificate against its profile; no search."""
    problem = problem_from_dict(report.problem)
    checks = []
    for k, entry in enumerate(report.certificates):
        description = entry.get('description', '')
        try:
            x = Profile.from_lists(entry['profile'])
            certificate = BlockingCertificate.from_dict(problem, entry['certificate'])
            valid = verify_certificate(problem, x, certificate)
            checks.append(CertificateCheck(k, description, valid, '' if valid else 'margins do not recompute'))
        except (KeyError, InterimCoreError) as e:
            checks.append(CertificateCheck(k, description, False, str(e)))
    return checks
