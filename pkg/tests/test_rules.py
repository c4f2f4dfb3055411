import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spotex.fingerprint import (
    Fingerprint,
    NetworkId,
    NetworkKind,
    NetworkObservation,
    NetworkSelector,
)
from spotex.rules import (
    And,
    CmpOp,
    Not,
    Or,
    RenderMode,
    Rule,
    RuleSet,
    RssiCmp,
    Snippet,
    TimeIn,
    ValidationError,
    Visible,
    cond_tokens_for,
    eval_predicate,
    fire_rules,
    render_page,
)

from .strategies import fingerprints, predicates

EMPTY = Fingerprint()
NOON = 720


def fp_of(**ssids_to_rssi):
    observations = []
    for i, (ssid, rssi) in enumerate(ssids_to_rssi.items()):
        observations.append(
            NetworkObservation(
                id=NetworkId(ssid=ssid, mac=f"02:00:00:00:00:{i + 1:02X}"),
                kind=NetworkKind.WIFI,
                rssi=rssi,
                observed_at=0,
            )
        )
    return Fingerprint(tuple(observations))


def vis(ssid):
    return Visible(NetworkSelector.by_ssid(ssid))


def ruleset(*rules, snippets=None):
    if snippets is None:
        snippets = {"s": Snippet(id="s", title="t", html="x")}
    return RuleSet(snippets=snippets, rules=tuple(rules))


# --- predicate evaluation ---------------------------------------------------


def test_visible_true_when_named_network_present():
    assert eval_predicate(vis("Café"), fp_of(Café=-65), NOON)
    assert not eval_predicate(vis("Café"), EMPTY, NOON)


def test_not_visible_on_empty_fingerprint():
    assert eval_predicate(Not(vis("X")), EMPTY, NOON)


@pytest.mark.parametrize(
    "observed,expected",
    [(-65, True), (-70, True), (-75, False), (None, False)],
)
def test_rssi_ge_cases(observed, expected):
    p = RssiCmp(sel=NetworkSelector.by_ssid("Café"), op=CmpOp.GE, threshold=-70)
    fp = EMPTY if observed is None else fp_of(Café=observed)
    assert eval_predicate(p, fp, NOON) is expected


def test_rssi_cmp_brute_force_truth_table():
    """Every operator against every rssi value and absence, vs direct comparison."""
    threshold = -70
    for op in CmpOp:
        p = RssiCmp(sel=NetworkSelector.by_ssid("a"), op=op, threshold=threshold)
        assert eval_predicate(p, EMPTY, NOON) is False
        for value in range(-90, -49):
            expected = {
                CmpOp.GE: value >= threshold,
                CmpOp.GT: value > threshold,
                CmpOp.LE: value <= threshold,
                CmpOp.LT: value < threshold,
            }[op]
            assert eval_predicate(p, fp_of(a=value), NOON) is expected


def test_time_in_examples():
    late = TimeIn(start=22 * 60, end=2 * 60)
    assert eval_predicate(late, EMPTY, 23 * 60)
    assert not eval_predicate(late, EMPTY, 3 * 60)


def test_time_in_full_enumeration_against_oracle():
    cases = [(22 * 60, 2 * 60), (2 * 60, 22 * 60), (0, 1), (1439, 0), (300, 300), (0, 1439)]
    for start, end in cases:
        p = TimeIn(start=start, end=end)
        for minute in range(1440):
            if start == end:
                expected = False
            elif start < end:
                expected = start <= minute < end
            else:
                expected = minute >= start or minute < end
            assert eval_predicate(p, EMPTY, minute) is expected, (start, end, minute)


def test_empty_window_matches_no_minute():
    p = TimeIn(start=300, end=300)
    assert not any(eval_predicate(p, EMPTY, m) for m in range(1440))


# --- firing -----------------------------------------------------------------


def test_paper_style_cafe_scenario():
    rs = ruleset(Rule(id="cafe_rule", condition=vis("Café"), snippet_id="s"))
    result = fire_rules(rs, fp_of(Café=-65), NOON)
    assert result.fired_rule_ids == ("cafe_rule",)
    assert [s.id for s in result.snippets] == ["s"]


def test_nothing_fires_on_empty_fingerprint():
    rs = ruleset(Rule(id="r", condition=vis("X"), snippet_id="s"))
    result = fire_rules(rs, EMPTY, NOON)
    assert result.fired_rule_ids == ()
    assert result.snippets == ()


def test_priority_orders_fired_rules_and_dedups_snippets():
    rs = ruleset(
        Rule(id="r5", condition=vis("X"), snippet_id="s", priority=5),
        Rule(id="r10", condition=vis("X"), snippet_id="s", priority=10),
    )
    result = fire_rules(rs, fp_of(X=-60), NOON)
    assert result.fired_rule_ids == ("r10", "r5")
    assert [s.id for s in result.snippets] == ["s"]


def test_declaration_order_breaks_priority_ties():
    snippets = {
        "s1": Snippet(id="s1", title="", html="1"),
        "s2": Snippet(id="s2", title="", html="2"),
    }
    rs = ruleset(
        Rule(id="first", condition=vis("X"), snippet_id="s1"),
        Rule(id="second", condition=vis("X"), snippet_id="s2"),
        snippets=snippets,
    )
    result = fire_rules(rs, fp_of(X=-60), NOON)
    assert result.fired_rule_ids == ("first", "second")
    assert [s.id for s in result.snippets] == ["s1", "s2"]


def test_fire_rules_is_deterministic():
    rs = ruleset(
        Rule(id="a", condition=vis("X"), snippet_id="s", priority=1),
        Rule(id="b", condition=Not(vis("Y")), snippet_id="s"),
    )
    fp = fp_of(X=-60)
    results = {fire_rules(rs, fp, NOON) for _ in range(5)}
    assert len(results) == 1


def test_validation_rejects_bad_ruleset_shapes():
    with pytest.raises(ValidationError):
        ruleset(Rule(id="r", condition=vis("X"), snippet_id="missing"))
    with pytest.raises(ValidationError):
        ruleset(Rule(id="9lives", condition=vis("X"), snippet_id="s"))
    with pytest.raises(ValidationError):
        RuleSet(snippets={"a": Snippet(id="b", title="", html="")}, rules=())


@given(predicates, fingerprints, st.integers(0, 1439))
def test_eval_matches_naive_recursive_oracle(p, fp, now):
    def naive(node):
        if isinstance(node, Visible):
            return any(node.sel.matches(o) for o in fp)
        if isinstance(node, RssiCmp):
            matched = [o.rssi for o in fp if node.sel.matches(o)]
            if not matched:
                return False
            value = max(matched)
            return {
                CmpOp.GE: value >= node.threshold,
                CmpOp.GT: value > node.threshold,
                CmpOp.LE: value <= node.threshold,
                CmpOp.LT: value < node.threshold,
            }[node.op]
        if isinstance(node, TimeIn):
            if node.start == node.end:
                return False
            if node.start < node.end:
                return node.start <= now < node.end
            return now >= node.start or now < node.end
        if isinstance(node, Not):
            return not naive(node.p)
        if isinstance(node, And):
            return naive(node.p) and naive(node.q)
        return naive(node.p) or naive(node.q)

    assert eval_predicate(p, fp, now) is naive(p)


@given(fingerprints, st.integers(0, 1439))
def test_visible_only_positive_rules_are_monotone(fp, now):
    """Adding an observation never unfires a NOT-free, upper-bound-free rule."""
    condition = And(vis("mono_a"), Or(vis("mono_b"), RssiCmp(NetworkSelector.by_ssid("mono_a"), CmpOp.GE, -80)))
    rs = ruleset(Rule(id="r", condition=condition, snippet_id="s"))
    rng = random.Random(42)
    before = fire_rules(rs, fp, now).fired_rule_ids
    extra = NetworkObservation(
        id=NetworkId(ssid="mono_a", mac="0E:00:00:00:00:01"),
        kind=NetworkKind.WIFI,
        rssi=rng.choice([-70, -60]),
        observed_at=0,
    )
    if any(o.key == extra.key for o in fp):
        return
    grown = Fingerprint(tuple(fp) + (extra,))
    after = fire_rules(rs, grown, now).fired_rule_ids
    assert set(before) <= set(after)


# --- rendering ----------------------------------------------------------------


def test_render_filtered_one_div_per_fired_rule():
    rs = ruleset(Rule(id="cafe_rule", condition=vis("Café"), snippet_id="s"))
    result = fire_rules(rs, fp_of(Café=-61), NOON)
    assert render_page(rs, result, RenderMode.FILTERED) == '<div id="cafe_rule">x</div>'


def test_render_filtered_empty_when_nothing_fired():
    rs = ruleset(Rule(id="r", condition=vis("X"), snippet_id="s"))
    result = fire_rules(rs, EMPTY, NOON)
    assert render_page(rs, result, RenderMode.FILTERED) == ""


def test_render_filtered_skips_duplicate_snippets():
    rs = ruleset(
        Rule(id="a", condition=vis("X"), snippet_id="s"),
        Rule(id="b", condition=vis("X"), snippet_id="s"),
    )
    result = fire_rules(rs, fp_of(X=-60), NOON)
    html = render_page(rs, result, RenderMode.FILTERED)
    assert html == '<div id="a">x</div>'


def test_render_annotated_carries_cond_tokens():
    rs = ruleset(Rule(id="r", condition=And(vis("AP1"), vis("AP2")), snippet_id="s"))
    result = fire_rules(rs, fp_of(AP1=-60, AP2=-60), NOON)
    html = render_page(rs, result, RenderMode.ANNOTATED)
    assert html == '<div id="r" cond="AP1 AP2">x</div>'


def test_render_annotated_hides_unfired_rules():
    rs = ruleset(Rule(id="r", condition=vis("AP1"), snippet_id="s"))
    result = fire_rules(rs, EMPTY, NOON)
    html = render_page(rs, result, RenderMode.ANNOTATED)
    assert html == '<div id="r" cond="AP1" style="display:none">x</div>'


def test_render_annotated_non_conjunctive_conditions_have_no_cond():
    rs = ruleset(Rule(id="r", condition=Or(vis("AP1"), vis("AP2")), snippet_id="s"))
    result = fire_rules(rs, fp_of(AP1=-60), NOON)
    html = render_page(rs, result, RenderMode.ANNOTATED)
    assert html == '<div id="r">x</div>'


def test_render_annotated_escapes_attribute_values():
    rs = ruleset(Rule(id="r", condition=vis("A&B"), snippet_id="s"))
    result = fire_rules(rs, EMPTY, NOON)
    html = render_page(rs, result, RenderMode.ANNOTATED)
    assert 'cond="A&amp;B"' in html


def test_cond_tokens():
    assert cond_tokens_for(And(vis("AP1"), vis("AP2"))) == ["AP1", "AP2"]
    assert cond_tokens_for(Visible(NetworkSelector.by_mac("AA:BB:CC:DD:EE:FF"))) == [
        "mac:AA:BB:CC:DD:EE:FF"
    ]
    assert cond_tokens_for(vis("has space")) is None
    assert cond_tokens_for(vis("mac:oddname")) is None
    assert cond_tokens_for(Not(vis("AP1"))) is None
    assert cond_tokens_for(And(vis("AP1"), Or(vis("a"), vis("b")))) is None
