"""Static checks over a rule set: dead rules, orphan snippets, ghost selectors.

Reachability is decided by brute force over the visibility of each selector
a rule references, with RSSI and time atoms treated as unknowns (Kleene
three-valued logic). A rule that comes out false under every assignment can
never fire. The table is capped at 16 selectors per rule; beyond that the
check is skipped and reported as info.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product

from .fingerprint import NetworkSelector
from .rules import And, Not, Or, Predicate, RssiCmp, RuleSet, TimeIn, Visible, predicate_selectors
from .venue import Venue

MAX_LINT_SELECTORS = 16

SEVERITY_WARNING = "warning"
SEVERITY_INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    rule_id: str | None
    message: str

    def to_json(self) -> str:
        return json.dumps(
            {"severity": self.severity, "rule_id": self.rule_id, "message": self.message},
            ensure_ascii=False,
            separators=(",", ":"),
        )


def _kleene(p: Predicate, visible: dict[NetworkSelector, bool]) -> bool | None:
    """Evaluate with None as 'unknown'; sound for reachability.

    RSSI atoms are unknown when their selector is visible (false otherwise,
    no signal means no comparison); time windows are unknown unless empty.
    """
    if isinstance(p, Visible):
        return visible[p.sel]
    if isinstance(p, RssiCmp):
        return None if visible[p.sel] else False
    if isinstance(p, TimeIn):
        return False if p.start == p.end else None
    if isinstance(p, Not):
        inner = _kleene(p.p, visible)
        return None if inner is None else not inner
    if isinstance(p, And):
        a, b = _kleene(p.p, visible), _kleene(p.q, visible)
        if a is False or b is False:
            return False
        if a is True and b is True:
            return True
        return None
    a, b = _kleene(p.p, visible), _kleene(p.q, visible)
    if a is True or b is True:
        return True
    if a is False and b is False:
        return False
    return None


def _can_fire(condition: Predicate, selectors: list[NetworkSelector]) -> bool:
    for bits in product((False, True), repeat=len(selectors)):
        if _kleene(condition, dict(zip(selectors, bits))) is not False:
            return True
    return False


def _selector_in_venue(sel: NetworkSelector, venue: Venue) -> bool:
    for ap in venue.aps:
        if sel.mac is not None:
            if ap.id.mac == sel.mac:
                return True
        elif sel.ssid != "" and ap.id.ssid == sel.ssid:
            return True
    return False


def _selector_text(sel: NetworkSelector) -> str:
    if sel.mac is not None:
        return f'mac:"{sel.mac}"'
    return f'ssid:"{sel.ssid}"'


def lint_ruleset(rs: RuleSet, venue: Venue | None = None) -> list[Diagnostic]:
    out: list[Diagnostic] = []

    shown = {rule.snippet_id for rule in rs.rules}
    for snippet_id in rs.snippets:
        if snippet_id not in shown:
            out.append(
                Diagnostic(SEVERITY_WARNING, None, f"orphan snippet {snippet_id!r} is never shown")
            )

    for rule in rs.rules:
        selectors = predicate_selectors(rule.condition)
        if len(selectors) > MAX_LINT_SELECTORS:
            out.append(
                Diagnostic(
                    SEVERITY_INFO,
                    rule.id,
                    f"rule references {len(selectors)} selectors; "
                    f"reachability check skipped (limit {MAX_LINT_SELECTORS})",
                )
            )
        elif not _can_fire(rule.condition, selectors):
            out.append(
                Diagnostic(
                    SEVERITY_WARNING, rule.id, "unreachable rule: condition can never be true"
                )
            )
        if venue is not None:
            for sel in selectors:
                if not _selector_in_venue(sel, venue):
                    out.append(
                        Diagnostic(
                            SEVERITY_WARNING,
                            rule.id,
                            f"selector {_selector_text(sel)} matches no venue AP",
                        )
                    )
    return out
