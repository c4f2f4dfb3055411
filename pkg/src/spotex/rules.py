"""Rule model and evaluation.

A rule links a condition over the current fingerprint (and optionally the
time of day) to a content snippet. Firing a rule set against a fingerprint
yields the ordered, deduplicated list of snippets to show; rendering turns
that into the page's div blocks.
"""

from __future__ import annotations

import html as html_mod
import re
from dataclasses import dataclass, field
from enum import Enum

from .fingerprint import (
    Fingerprint,
    NetworkSelector,
    RSSI_MAX,
    RSSI_MIN,
    is_visible,
    observed_rssi,
)

IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
MINUTES_PER_DAY = 1440
MAX_PREDICATE_DEPTH = 32


class CmpOp(Enum):
    GE = ">="
    GT = ">"
    LE = "<="
    LT = "<"

    def apply(self, value: int, threshold: int) -> bool:
        if self is CmpOp.GE:
            return value >= threshold
        if self is CmpOp.GT:
            return value > threshold
        if self is CmpOp.LE:
            return value <= threshold
        return value < threshold


# --- predicate tree ------------------------------------------------------


@dataclass(frozen=True)
class Visible:
    sel: NetworkSelector


@dataclass(frozen=True)
class RssiCmp:
    sel: NetworkSelector
    op: CmpOp
    threshold: int


@dataclass(frozen=True)
class TimeIn:
    start: int  # minutes of day
    end: int


@dataclass(frozen=True)
class Not:
    p: "Predicate"


@dataclass(frozen=True)
class And:
    p: "Predicate"
    q: "Predicate"


@dataclass(frozen=True)
class Or:
    p: "Predicate"
    q: "Predicate"


Predicate = Visible | RssiCmp | TimeIn | Not | And | Or


def predicate_depth(p: Predicate) -> int:
    if isinstance(p, Not):
        return 1 + predicate_depth(p.p)
    if isinstance(p, (And, Or)):
        return 1 + max(predicate_depth(p.p), predicate_depth(p.q))
    return 1


def predicate_selectors(p: Predicate) -> list[NetworkSelector]:
    """Distinct selectors referenced by a predicate, in first-seen order."""
    out: list[NetworkSelector] = []

    def walk(node: Predicate):
        if isinstance(node, (Visible, RssiCmp)):
            if node.sel not in out:
                out.append(node.sel)
        elif isinstance(node, Not):
            walk(node.p)
        elif isinstance(node, (And, Or)):
            walk(node.p)
            walk(node.q)

    walk(p)
    return out


def eval_predicate(p: Predicate, fp: Fingerprint, now: int) -> bool:
    """Evaluate a predicate against a fingerprint at `now` minutes of day.

    An RSSI comparison on a network that is not visible is false, not an
    error: absence of signal is information. Time windows are half-open
    [start, end) and wrap midnight when end < start; an empty window
    (start == end) matches no minute.
    """
    if isinstance(p, Visible):
        return is_visible(fp, p.sel)
    if isinstance(p, RssiCmp):
        value = observed_rssi(fp, p.sel)
        return value is not None and p.op.apply(value, p.threshold)
    if isinstance(p, TimeIn):
        if p.start == p.end:
            return False
        if p.start < p.end:
            return p.start <= now < p.end
        return now >= p.start or now < p.end
    if isinstance(p, Not):
        return not eval_predicate(p.p, fp, now)
    if isinstance(p, And):
        return eval_predicate(p.p, fp, now) and eval_predicate(p.q, fp, now)
    if isinstance(p, Or):
        return eval_predicate(p.p, fp, now) or eval_predicate(p.q, fp, now)
    raise TypeError(f"not a predicate: {p!r}")


# --- rule set ------------------------------------------------------------


class ValidationError(ValueError):
    """Raised when a structurally parsed rule set violates its invariants."""


@dataclass(frozen=True)
class Snippet:
    id: str
    title: str
    html: str


@dataclass(frozen=True)
class Rule:
    id: str
    condition: Predicate
    snippet_id: str
    priority: int = 0


# Identifiers that the DSL grammar reserves; ids may not collide with them
# or the set could not be written back out as text.
RESERVED_WORDS = frozenset(
    {"SNIPPET", "TITLE", "HTML", "RULE", "PRIORITY", "IF", "THEN", "SHOW", "AND", "OR", "NOT"}
)


@dataclass(frozen=True)
class RuleSet:
    snippets: dict[str, Snippet] = field(default_factory=dict)
    rules: tuple[Rule, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        validate_ruleset(self)


def validate_ruleset(rs: RuleSet) -> None:
    for sid, snippet in rs.snippets.items():
        if sid != snippet.id:
            raise ValidationError(f"snippet map key {sid!r} != snippet id {snippet.id!r}")
        _check_ident(snippet.id, "snippet")
    seen_rules = set()
    for rule in rs.rules:
        _check_ident(rule.id, "rule")
        if rule.id in seen_rules:
            raise ValidationError(f"duplicate rule id {rule.id!r}")
        seen_rules.add(rule.id)
        if rule.snippet_id not in rs.snippets:
            raise ValidationError(f"rule {rule.id!r} shows unknown snippet {rule.snippet_id!r}")
        _validate_predicate(rule.condition, rule.id)


def _check_ident(ident: str, what: str) -> None:
    if not IDENT_RE.match(ident):
        raise ValidationError(f"invalid {what} id {ident!r}")
    if ident in RESERVED_WORDS:
        raise ValidationError(f"{what} id {ident!r} is a reserved word")


def _validate_predicate(p: Predicate, rule_id: str) -> None:
    if predicate_depth(p) > MAX_PREDICATE_DEPTH:
        raise ValidationError(f"rule {rule_id!r}: condition deeper than {MAX_PREDICATE_DEPTH}")

    def walk(node: Predicate):
        if isinstance(node, RssiCmp):
            if not RSSI_MIN <= node.threshold <= RSSI_MAX:
                raise ValidationError(
                    f"rule {rule_id!r}: RSSI threshold {node.threshold} out of "
                    f"[{RSSI_MIN}, {RSSI_MAX}]"
                )
        elif isinstance(node, TimeIn):
            for value in (node.start, node.end):
                if not 0 <= value < MINUTES_PER_DAY:
                    raise ValidationError(f"rule {rule_id!r}: time {value} out of range")
        elif isinstance(node, Not):
            walk(node.p)
        elif isinstance(node, (And, Or)):
            walk(node.p)
            walk(node.q)

    walk(p)


@dataclass(frozen=True)
class FiredResult:
    """Outcome of one evaluation: which rules fired and what to show.

    Rules are ordered by descending priority, ties broken by declaration
    order; each snippet appears at most once, kept where it first fired.
    """

    fired_rule_ids: tuple[str, ...]
    snippets: tuple[Snippet, ...]


def _rule_order(rs: RuleSet) -> list[Rule]:
    indexed = list(enumerate(rs.rules))
    indexed.sort(key=lambda pair: (-pair[1].priority, pair[0]))
    return [rule for _, rule in indexed]


def fire_rules(rs: RuleSet, fp: Fingerprint, now: int) -> FiredResult:
    """Evaluate every rule against the fingerprint and collect what fired."""
    fired: list[str] = []
    snippets: list[Snippet] = []
    shown: set[str] = set()
    for rule in _rule_order(rs):
        if eval_predicate(rule.condition, fp, now):
            fired.append(rule.id)
            if rule.snippet_id not in shown:
                shown.add(rule.snippet_id)
                snippets.append(rs.snippets[rule.snippet_id])
    return FiredResult(fired_rule_ids=tuple(fired), snippets=tuple(snippets))


# --- rendering -----------------------------------------------------------


class RenderMode(Enum):
    FILTERED = "filtered"
    ANNOTATED = "annotated"


class RenderError(Exception):
    """Raised when fired content cannot be rendered."""


_TOKEN_FORBIDDEN = re.compile(r"[\s\"]")


def cond_token_for(sel: NetworkSelector) -> str | None:
    """The cond-attribute token for a selector, or None if inexpressible.

    Tokens are whitespace-separated in the attribute, SSIDs by default
    with a mac: prefix as the escape, so SSIDs containing whitespace,
    quotes, or a leading mac: cannot be represented.
    """
    if sel.mac is not None:
        return f"mac:{sel.mac}"
    assert sel.ssid is not None
    if not sel.ssid or _TOKEN_FORBIDDEN.search(sel.ssid) or sel.ssid.startswith("mac:"):
        return None
    return sel.ssid


def cond_tokens_for(p: Predicate) -> list[str] | None:
    """Tokens for a pure conjunction of visibility checks, else None.

    Only conditions of shape VISIBLE AND VISIBLE AND ... export to the
    cond attribute; anything richer stays server-evaluated.
    """
    if isinstance(p, Visible):
        token = cond_token_for(p.sel)
        return None if token is None else [token]
    if isinstance(p, And):
        left = cond_tokens_for(p.p)
        right = cond_tokens_for(p.q)
        if left is None or right is None:
            return None
        return left + right
    return None


def render_page(rs: RuleSet, result: FiredResult, mode: RenderMode) -> str:
    """Render fired content as div blocks.

    FILTERED emits only fired content, one div per fired rule, skipping
    rules whose snippet is already on the page. ANNOTATED emits a div for
    every rule, annotating conjunctive visibility conditions via the cond
    attribute and hiding non-fired blocks with an inline style that the
    browser shim may re-toggle.
    """
    parts: list[str] = []
    if mode is RenderMode.FILTERED:
        shown: set[str] = set()
        by_id = {rule.id: rule for rule in rs.rules}
        for rule_id in result.fired_rule_ids:
            rule = by_id[rule_id]
            if rule.snippet_id in shown:
                continue
            shown.add(rule.snippet_id)
            snippet = rs.snippets[rule.snippet_id]
            parts.append(f'<div id="{rule.id}">{snippet.html}</div>')
        return "\n".join(parts)

    fired = set(result.fired_rule_ids)
    for rule in _rule_order(rs):
        snippet = rs.snippets[rule.snippet_id]
        attrs = [f'id="{rule.id}"']
        tokens = cond_tokens_for(rule.condition)
        if tokens is not None:
            attrs.append(f'cond="{html_mod.escape(" ".join(tokens), quote=True)}"')
        if rule.id not in fired:
            attrs.append('style="display:none"')
        parts.append(f"<div {' '.join(attrs)}>{snippet.html}</div>")
    return "\n".join(parts)
