import json

import pytest
from hypothesis import given, settings, strategies as st

from ftsafra.fixtures import BUILTINS, builtin
from ftsafra.scenario import ReplayError, Scenario, ScenarioError, parse_trace, replay, run_scenario


def seeded(alg, n, seed, m=3, crashes=0, steps=300):
    return Scenario(alg, n, "fixed", m, 2, mode="seeded", seed=seed, max_steps=steps, max_crashes=crashes)


def test_builtin_names():
    assert set(BUILTINS) == {"example1-fig1", "example2-fig2", "kff21-bug-n2"}
    with pytest.raises(KeyError, match="unknown builtin"):
        builtin("nope")


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_scenario_json_round_trip(name):
    sc = builtin(name)
    again = Scenario.from_json(json.loads(json.dumps(sc.to_json())))
    assert again == sc


def test_seeded_scenario_round_trip():
    sc = seeded("ft", 3, 5, crashes=1)
    d = sc.to_json()
    assert d["seeded"] == [5, 300]
    assert Scenario.from_json(d) == sc


@pytest.mark.parametrize(
    "doc, msg",
    [
        ("[]", "JSON object"),
        ('{"algorithm": "ft"}', "malformed"),
        ('{"algorithm": "ft", "n": 2, "mode": "random"}', "unknown mode"),
        ('{"algorithm": "classic", "n": 1, "transitions": []}', "ring size"),
        ('{"algorithm": "ft", "n": 2, "version": 9, "transitions": []}', "version"),
    ],
)
def test_bad_scenarios(doc, msg):
    with pytest.raises(ScenarioError, match=msg):
        Scenario.from_json(json.loads(doc))


def test_load_reports_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        Scenario.load(p)


def test_disabled_scripted_step_names_the_step():
    sc = builtin("example1-fig1")
    sc.transitions = sc.transitions[:2] + [{"kind": "send", "node": 2, "dest": 0}]
    with pytest.raises(ReplayError) as err:
        run_scenario(sc)
    assert err.value.step == 3


def test_bad_transition_shape():
    sc = builtin("example1-fig1")
    sc.transitions = [{"kind": "send", "node": "x"}]
    with pytest.raises(ScenarioError):
        run_scenario(sc)


def test_trace_format():
    tr = run_scenario(builtin("example1-fig1"))
    lines = tr.dumps().splitlines()
    header = json.loads(lines[0])
    assert header["type"] == "header" and header["digest"] == "fnv1a64/int64le"
    assert header["n"] == 3 and header["algorithm"] == "classic"
    recs = [json.loads(x) for x in lines[1:]]
    assert [r["step"] for r in recs] == list(range(1, 12))
    assert all(set(r) == {"step", "kind", "actor", "detail", "digest"} for r in recs)
    assert recs[-1]["detail"]["events"] == ["announce node=1"]
    assert recs[-1]["detail"]["terminated"] is True


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_replay_reproduces_digests(name):
    tr = run_scenario(builtin(name))
    again = replay(tr.dumps())
    assert again.dumps() == tr.dumps()
    assert [v.prop for v in again.violations] == [v.prop for v in tr.violations]


def test_replay_detects_tampering():
    text = run_scenario(builtin("example2-fig2")).dumps()
    lines = text.splitlines()
    rec = json.loads(lines[5])
    rec["digest"] = "0" * 16
    lines[5] = json.dumps(rec)
    with pytest.raises(ReplayError) as err:
        replay("\n".join(lines))
    assert err.value.step == 5


def test_replay_rejects_foreign_input():
    with pytest.raises(ScenarioError):
        parse_trace("")
    with pytest.raises(ScenarioError):
        parse_trace('{"type": "other"}')
    with pytest.raises(ScenarioError):
        parse_trace('{"type": "header", "digest": "md5"}')
    with pytest.raises(ScenarioError):
        parse_trace("not json")


def test_transitions_rebuild_the_script():
    tr = run_scenario(builtin("example2-fig2"))
    sc = builtin("example2-fig2")
    sc.transitions = tr.transitions()
    assert run_scenario(sc).dumps() == tr.dumps()


def test_seeded_runs_are_deterministic():
    a = run_scenario(seeded("ft", 4, 11, crashes=2)).dumps()
    b = run_scenario(seeded("ft", 4, 11, crashes=2)).dumps()
    c = run_scenario(seeded("ft", 4, 12, crashes=2)).dumps()
    assert a == b and a != c


@settings(max_examples=40, deadline=None)
@given(
    alg=st.sampled_from(["classic", "ft"]),
    n=st.integers(2, 5),
    m=st.integers(0, 5),
    seed=st.integers(0, 10**6),
    crash_frac=st.floats(0, 1),
)
def test_random_runs_are_safe_and_replayable(alg, n, m, seed, crash_frac):
    crashes = 0 if alg == "classic" else int(crash_frac * (n - 1))
    tr = run_scenario(seeded(alg, n, seed, m=m, crashes=crashes))
    assert tr.violations == []
    assert tr.announced_by is not None
    assert tr.stats["backup_sends"] <= tr.stats["crashes"]
    assert replay(tr.dumps()).dumps() == tr.dumps()


def test_buggy_variant_monitors():
    tr = run_scenario(builtin("kff21-bug-n2"))
    assert [(v.prop, v.step) for v in tr.violations] == [
        ("announce-before-termination", 5),
        ("active-after-announce", 6),
    ]
    assert tr.announced_by == 0 and tr.announce_terminated is False
