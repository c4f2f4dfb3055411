import json

from spotex.dsl import parse_ruleset
from spotex.fingerprint import NetworkSelector
from spotex.lint import SEVERITY_INFO, SEVERITY_WARNING, lint_ruleset
from spotex.rules import And, Or, Rule, RuleSet, Snippet, Visible
from spotex.venue import load_venue

VENUE = load_venue(
    json.dumps(
        {
            "name": "v",
            "aps": [{"ssid": "Café", "mac": "AA:BB:CC:DD:EE:FF", "x": 0, "y": 0, "floor": 0}],
        }
    )
)


def lint_source(source, venue=None):
    return lint_ruleset(parse_ruleset(source), venue)


def test_clean_ruleset_yields_nothing():
    diags = lint_source(
        'SNIPPET s TITLE "t" HTML <<<x>>>\nRULE r IF visible(ssid:"Café") THEN SHOW s', VENUE
    )
    assert diags == []


def test_contradiction_is_unreachable():
    diags = lint_source(
        'SNIPPET s TITLE "t" HTML <<<x>>>\n'
        'RULE dead IF visible(ssid:"x") AND NOT visible(ssid:"x") THEN SHOW s'
    )
    assert any(d.severity == SEVERITY_WARNING and d.rule_id == "dead" and "unreachable" in d.message for d in diags)


def test_rssi_without_visibility_is_unreachable():
    diags = lint_source(
        'SNIPPET s TITLE "t" HTML <<<x>>>\n'
        'RULE dead IF rssi(ssid:"x") >= -70 AND NOT visible(ssid:"x") THEN SHOW s'
    )
    assert any("unreachable" in d.message for d in diags)


def test_empty_time_window_is_unreachable():
    diags = lint_source('SNIPPET s TITLE "t" HTML <<<x>>>\nRULE dead IF time(10:00, 10:00) THEN SHOW s')
    assert any("unreachable" in d.message for d in diags)


def test_satisfiable_negation_is_not_flagged():
    diags = lint_source('SNIPPET s TITLE "t" HTML <<<x>>>\nRULE ok IF NOT visible(ssid:"x") THEN SHOW s')
    assert not any("unreachable" in d.message for d in diags)


def test_rssi_bounds_are_not_overclaimed():
    # Not decidable at selector granularity; must stay silent, not warn.
    diags = lint_source(
        'SNIPPET s TITLE "t" HTML <<<x>>>\n'
        'RULE maybe IF rssi(ssid:"x") >= -50 AND rssi(ssid:"x") <= -60 THEN SHOW s'
    )
    assert not any("unreachable" in d.message for d in diags)


def test_orphan_snippet_warning():
    diags = lint_source(
        'SNIPPET used TITLE "t" HTML <<<x>>>\nSNIPPET orphan TITLE "t" HTML <<<y>>>\n'
        'RULE r IF visible(ssid:"a") THEN SHOW used'
    )
    orphans = [d for d in diags if "orphan" in d.message]
    assert len(orphans) == 1
    assert orphans[0].rule_id is None
    assert "'orphan'" in orphans[0].message


def test_ghost_selector_against_venue():
    diags = lint_source(
        'SNIPPET s TITLE "t" HTML <<<x>>>\nRULE r IF visible(ssid:"Ghost") THEN SHOW s', VENUE
    )
    assert any("matches no venue AP" in d.message and d.rule_id == "r" for d in diags)


def test_mac_selector_matches_venue_ap():
    diags = lint_source(
        'SNIPPET s TITLE "t" HTML <<<x>>>\nRULE r IF visible(mac:"aa:bb:cc:dd:ee:ff") THEN SHOW s',
        VENUE,
    )
    assert diags == []


def test_selector_overflow_reported_as_info():
    condition = Visible(NetworkSelector.by_ssid("ap0"))
    for i in range(1, 17):
        condition = Or(condition, Visible(NetworkSelector.by_ssid(f"ap{i}")))
    rs = RuleSet(
        snippets={"s": Snippet(id="s", title="t", html="x")},
        rules=(Rule(id="big", condition=condition, snippet_id="s"),),
    )
    diags = lint_ruleset(rs)
    assert any(d.severity == SEVERITY_INFO and d.rule_id == "big" and "skipped" in d.message for d in diags)
    assert not any("unreachable" in d.message for d in diags)


def test_sixteen_selectors_still_checked():
    condition = Visible(NetworkSelector.by_ssid("ap0"))
    for i in range(1, 16):
        condition = And(condition, Visible(NetworkSelector.by_ssid(f"ap{i}")))
    contradiction = And(condition, Visible(NetworkSelector.by_ssid("ap0")))
    rs = RuleSet(
        snippets={"s": Snippet(id="s", title="t", html="x")},
        rules=(Rule(id="wide", condition=contradiction, snippet_id="s"),),
    )
    assert lint_ruleset(rs) == []


def test_diagnostic_json_line_shape():
    diags = lint_source('SNIPPET orphan TITLE "t" HTML <<<x>>>')
    parsed = json.loads(diags[0].to_json())
    assert set(parsed.keys()) == {"severity", "rule_id", "message"}
