"""Three-valued decisions with checkable evidence.

Yes carries a certificate that an independent checker can replay, No carries
a named obstruction, Unknown carries the search bound that was exhausted.
Deciders in this package never guess: anything outside their decidable range
comes back Unknown.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

YES = "Yes"
NO = "No"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Decision:
    verdict: str
    certificate: Any = None
    obstruction: str | None = None
    detail: Any = None
    bounds: Any = None

    @staticmethod
    def yes(certificate: Any = None) -> "Decision":
        return Decision(YES, certificate=certificate)

    @staticmethod
    def no(obstruction: str, detail: Any = None) -> "Decision":
        return Decision(NO, obstruction=obstruction, detail=detail)

    @staticmethod
    def unknown(bounds: Any = None) -> "Decision":
        return Decision(UNKNOWN, bounds=bounds)

    @property
    def is_yes(self) -> bool:
        return self.verdict == YES

    @property
    def is_no(self) -> bool:
        return self.verdict == NO

    @property
    def is_unknown(self) -> bool:
        return self.verdict == UNKNOWN

    def to_json(self) -> dict:
        out: dict[str, Any] = {"verdict": self.verdict}
        if self.verdict == YES and self.certificate is not None:
            out["certificate"] = self.certificate
        if self.verdict == NO:
            out["obstruction"] = self.obstruction
            if self.detail is not None:
                out["detail"] = self.detail
        if self.verdict == UNKNOWN:
            out["bounds"] = self.bounds
        return out
