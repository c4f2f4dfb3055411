"""End-to-end acceptance gate.

Every test here checks one headline guarantee of the system and prints a
single PASS or FAIL line, so `pytest tests/test_acceptance.py -q -s` reads
as a checklist. Each check carries its own independent oracle; none reuse
the library's arithmetic to grade itself.
"""

import base64
import functools
import http.client
import itertools
import json
import math
import random
import threading

import httpx
import pytest
from hypothesis import given, settings

from spotex.dsl import parse_ruleset, serialize_ruleset
from spotex.fingerprint import (
    Fingerprint,
    NetworkId,
    NetworkKind,
    NetworkObservation,
    NetworkSelector,
    from_wire,
)
from spotex.proxy import (
    FINGERPRINT_HEADER,
    SESSION_HEADER,
    ProxyConfig,
    ProxyServer,
    decode_fingerprint_header,
    encode_fingerprint_header,
)
from spotex.rules import (
    And,
    CmpOp,
    Not,
    Or,
    Rule,
    RuleSet,
    RssiCmp,
    Snippet,
    TimeIn,
    Visible,
    eval_predicate,
    fire_rules,
)
from spotex.venue import DevicePoint, scan

from .conftest import GOLDEN, SESSION, move
from .echo import EchoUpstream
from .strategies import fingerprints, rulesets


def criterion(name):
    """Print one checklist line per acceptance criterion."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"[ACCEPTANCE] {name}: PASS")

        return wrapper

    return deco


# --- 1. rule engine equals a naive tree walker ----------------------------


def naive_eval(p, fp: Fingerprint, now: int) -> bool:
    """Straight-line reference evaluator, written without peeking."""
    if isinstance(p, Visible):
        return any(p.sel.matches(o) for o in fp.observations)
    if isinstance(p, RssiCmp):
        hits = [o.rssi for o in fp.observations if p.sel.matches(o)]
        if not hits:
            return False
        strongest = max(hits)
        return {
            ">=": strongest >= p.threshold,
            ">": strongest > p.threshold,
            "<=": strongest <= p.threshold,
            "<": strongest < p.threshold,
        }[p.op.value]
    if isinstance(p, TimeIn):
        if p.start == p.end:
            return False
        if p.start < p.end:
            return p.start <= now < p.end
        return now >= p.start or now < p.end
    if isinstance(p, Not):
        return not naive_eval(p.p, fp, now)
    if isinstance(p, And):
        return naive_eval(p.p, fp, now) and naive_eval(p.q, fp, now)
    if isinstance(p, Or):
        return naive_eval(p.p, fp, now) or naive_eval(p.q, fp, now)
    raise TypeError(p)


@criterion("rule engine matches naive evaluator on exhaustive predicate trees")
def test_rule_oracle_equivalence():
    sels = [NetworkSelector.by_ssid(f"AP{i}") for i in range(4)]
    leaves = [Visible(s) for s in sels]
    leaves.append(RssiCmp(sels[0], CmpOp.GE, -70))  # true whenever AP0 visible
    leaves.append(RssiCmp(sels[1], CmpOp.GT, -60))  # false even when AP1 visible

    depth2 = dict.fromkeys(leaves)
    for t in leaves:
        depth2[Not(t)] = None
    for a, b in itertools.product(leaves, leaves):
        depth2[And(a, b)] = None
        depth2[Or(a, b)] = None

    depth3 = dict(depth2)
    pool = list(depth2)
    for t in pool:
        depth3[Not(t)] = None
    for a, b in itertools.product(pool, pool):
        depth3[And(a, b)] = None
        depth3[Or(a, b)] = None
    predicates = list(depth3)
    assert len(predicates) > 14_000

    rs = RuleSet(
        snippets={"s": Snippet(id="s", title="t", html="<p>x</p>")},
        rules=tuple(
            Rule(id=f"r{i:05d}", condition=p, snippet_id="s")
            for i, p in enumerate(predicates)
        ),
    )

    def observation(i: int) -> NetworkObservation:
        return NetworkObservation(
            id=NetworkId(ssid=f"AP{i}", mac=f"02:00:00:00:00:0{i + 1}"),
            kind=NetworkKind.WIFI,
            rssi=-55 - 5 * i,
            observed_at=1000,
        )

    now = 720
    mismatches = 0
    for subset in itertools.product((False, True), repeat=4):
        fp = Fingerprint(tuple(observation(i) for i in range(4) if subset[i]))
        expected = [
            rule.id for rule in rs.rules if naive_eval(rule.condition, fp, now)
        ]
        got = fire_rules(rs, fp, now)
        if list(got.fired_rule_ids) != expected:
            mismatches += 1
        want_snippets = ["s"] if expected else []
        if [s.id for s in got.snippets] != want_snippets:
            mismatches += 1
    assert mismatches == 0


# --- 2. cafe walk-up scenario ---------------------------------------------


@criterion("cafe scenario: -61 dBm at 5 m fires, 40 m is out of range")
def test_cafe_scenario(cafe_venue, cafe_rules_text):
    rs = parse_ruleset(cafe_rules_text)

    near = scan(cafe_venue, DevicePoint(x=5.0, y=0.0, floor=0), now=1000, seed=7)
    assert len(near.observations) == 1
    got = near.observations[0]
    assert got.id.ssid == "Café"
    predicted = -40.0 - 30.0 * math.log10(5.0)
    assert abs(predicted - (-60.97)) < 0.01
    assert got.rssi == round(predicted) == -61

    fired = fire_rules(rs, near, now=720)
    assert "cafe_rule" in fired.fired_rule_ids

    far_predicted = -40.0 - 30.0 * math.log10(40.0)
    assert far_predicted < -85.0
    far = scan(cafe_venue, DevicePoint(x=40.0, y=0.0, floor=0), now=1000, seed=7)
    assert len(far.observations) == 0
    assert fire_rules(rs, far, now=720).fired_rule_ids == ()


# --- 3. floor discrimination ----------------------------------------------

FLOOR_RULES = """\
SNIPPET ground TITLE "Ground floor" HTML <<<
<p>ground</p>
>>>

SNIPPET upper TITLE "Upper floor" HTML <<<
<p>upper</p>
>>>

RULE on_ground IF rssi(ssid:"Ground_AP") >= -50 THEN SHOW ground
RULE on_upper IF rssi(ssid:"Upper_AP") >= -50 THEN SHOW upper
"""


@criterion("floor discrimination: strongest AP and fired snippets flip per floor")
def test_floor_discrimination(two_floor_venue):
    rs = parse_ruleset(FLOOR_RULES)

    def expected_rssi(dx: float, floors_apart: int) -> int:
        d = max(math.sqrt(dx * dx + (4.0 * floors_apart) ** 2), 1.0)
        return round(-40.0 - 30.0 * math.log10(d) - 15.0 * floors_apart)

    results = {}
    for floor in (0, 1):
        fp = scan(two_floor_venue, DevicePoint(x=1.0, y=0.0, floor=floor), now=1000, seed=7)
        by_ssid = {o.id.ssid: o.rssi for o in fp.observations}
        assert by_ssid["Ground_AP"] == expected_rssi(1.0, abs(floor - 0))
        assert by_ssid["Upper_AP"] == expected_rssi(1.0, abs(floor - 1))
        strongest = max(fp.observations, key=lambda o: o.rssi).id.ssid
        fired = fire_rules(rs, fp, now=720).fired_rule_ids
        results[floor] = (strongest, set(fired))

    assert results[0][0] == "Ground_AP"
    assert results[1][0] == "Upper_AP"
    assert results[0][1] == {"on_ground"}
    assert results[1][1] == {"on_upper"}
    assert results[0][1].isdisjoint(results[1][1])


# --- 4. wire exactness ------------------------------------------------------


@criterion("network lookup response is byte-identical to the golden capture")
def test_wire_exactness(make_dpi, cafe_rules_text, cafe_venue):
    server = make_dpi(cafe_rules_text, venue=cafe_venue)
    with httpx.Client(base_url=f"http://127.0.0.1:{server.port}") as client:
        move(client, server, SESSION, 5.0, 0.0)
        resp = client.get(
            "/getNetworks", params={"session": SESSION, "callback": "f"}
        )
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "application/javascript"
    golden = (GOLDEN / "getnetworks_cafe.txt").read_bytes()
    assert resp.content == golden
    assert resp.content.endswith(b");")


# --- 5. time-window truth table ---------------------------------------------


@criterion("time windows match the wrap-around oracle on all 1440 minutes")
def test_time_window_truth_table():
    rng = random.Random(0xACCE55)
    pairs = [(0, 0), (300, 300), (1439, 0)]
    while len(pairs) < 50:
        pairs.append((rng.randrange(1440), rng.randrange(1440)))

    empty = Fingerprint()
    mismatches = 0
    for start, end in pairs:
        window = TimeIn(start, end)
        for minute in range(1440):
            if start == end:
                expected = False
            elif start < end:
                expected = start <= minute < end
            else:
                expected = minute >= start or minute < end
            if eval_predicate(window, empty, minute) is not expected:
                mismatches += 1
    assert mismatches == 0


# --- 6. round-trips ----------------------------------------------------------


@criterion("parse/serialize and header encode/decode round-trip 200 cases each")
def test_round_trips():
    @settings(max_examples=200, derandomize=True, database=None)
    @given(rulesets())
    def ruleset_round_trip(rs):
        assert parse_ruleset(serialize_ruleset(rs)) == rs

    @settings(max_examples=200, derandomize=True, database=None)
    @given(fingerprints)
    def header_round_trip(fp):
        assert decode_fingerprint_header(encode_fingerprint_header(fp)) == fp

    ruleset_round_trip()
    header_round_trip()


# --- 7. rule-swap atomicity --------------------------------------------------

RULESET_A = """\
SNIPPET sa TITLE "A" HTML <<<
<p>A</p>
>>>

RULE a_rule IF visible(ssid:"Café") THEN SHOW sa
"""

RULESET_B = """\
SNIPPET sb TITLE "B" HTML <<<
<p>B</p>
>>>

RULE b_rule IF visible(ssid:"Café") THEN SHOW sb
"""


@criterion("rule swaps are atomic under concurrent evaluation")
def test_rule_swap_atomicity(make_dpi, cafe_venue):
    server = make_dpi(RULESET_A, venue=cafe_venue)
    base = f"http://127.0.0.1:{server.port}"
    with httpx.Client(base_url=base) as client:
        move(client, server, SESSION, 5.0, 0.0)

    valid = {
        (("a_rule",), ("sa",)),
        (("b_rule",), ("sb",)),
    }
    observed = []
    bad = []
    stop = threading.Event()

    def evaluator():
        with httpx.Client(base_url=base, timeout=5.0) as client:
            while not stop.is_set():
                resp = client.get("/evaluate", params={"session": SESSION, "now": "12:00"})
                if resp.status_code != 200:
                    bad.append(("status", resp.status_code))
                    continue
                data = resp.json()
                shape = (
                    tuple(data["fired"]),
                    tuple(s["id"] for s in data["snippets"]),
                )
                observed.append(shape)
                if shape not in valid:
                    bad.append(("blend", shape))

    threads = [threading.Thread(target=evaluator) for _ in range(4)]
    for t in threads:
        t.start()
    try:
        with httpx.Client(base_url=base, timeout=5.0) as client:
            for i in range(100):
                text = RULESET_A if i % 2 else RULESET_B
                resp = client.put(
                    "/rules",
                    content=text.encode("utf-8"),
                    headers={"Content-Type": "text/plain; charset=utf-8"},
                )
                assert resp.status_code == 200, resp.text
    finally:
        stop.set()
        for t in threads:
            t.join(timeout=10)

    assert bad == []
    assert len(observed) > 0
    assert set(observed) <= valid


# --- 8. proxy transparency + enrichment --------------------------------------


@criterion("proxy is transparent, enriches sessions, and fails open")
def test_proxy_transparency_and_enrichment(make_dpi, cafe_rules_text, cafe_venue):
    dpi = make_dpi(cafe_rules_text, venue=cafe_venue)
    upstream = EchoUpstream()
    upstream.start()
    proxy = ProxyServer(
        ProxyConfig(listen_port=0, dpi_url=f"http://127.0.0.1:{dpi.port}")
    )
    proxy.start()
    try:
        host = f"127.0.0.1:{upstream.port}"

        def through_proxy(method="GET", path="/", headers=None, body=None):
            conn = http.client.HTTPConnection("127.0.0.1", proxy.port, timeout=5)
            try:
                conn.request(method, f"http://{host}{path}", body=body, headers=headers or {})
                resp = conn.getresponse()
                return resp.status, resp.read()
            finally:
                conn.close()

        # sessionless: byte-identical modulo hop-by-hop, nothing injected
        status, _ = through_proxy(
            method="POST",
            path="/orders?cup=2",
            headers={
                "Host": host,
                "Content-Type": "application/json",
                "X-Trace": "abc123",
                "Connection": "close",
            },
            body=b'{"size":"tall"}',
        )
        assert status == 200
        got = upstream.received[-1]
        assert (got.method, got.path, got.body) == ("POST", "/orders?cup=2", b'{"size":"tall"}')
        assert got.header_set() == {
            ("host", host),
            ("accept-encoding", "identity"),
            ("content-type", "application/json"),
            ("x-trace", "abc123"),
            ("content-length", "15"),
        }

        # sessioned: header decodes to exactly the session's fingerprint
        with httpx.Client(base_url=f"http://127.0.0.1:{dpi.port}") as client:
            move(client, dpi, SESSION, 5.0, 0.0)
            wire = client.get("/getNetworks", params={"session": SESSION}).json()
        expected_fp = from_wire(wire)
        assert len(expected_fp) == 1

        status, _ = through_proxy(headers={"Host": host, SESSION_HEADER: SESSION})
        assert status == 200
        header = upstream.received[-1].header(FINGERPRINT_HEADER)
        assert header is not None
        assert decode_fingerprint_header(header) == expected_fp
        assert base64.b64decode(header.encode("ascii"))  # valid transport encoding

        # lookup service dies mid-run: headers vanish, upstream stays healthy
        dpi.stop()
        for _ in range(20):
            status, body = through_proxy(headers={"Host": host, SESSION_HEADER: SESSION})
            assert status == 200
            assert body == b'{"ok": true}'
            assert upstream.received[-1].header(FINGERPRINT_HEADER) is None
    finally:
        proxy.stop()
        upstream.stop()
