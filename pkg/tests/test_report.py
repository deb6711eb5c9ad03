import io
import json

import numpy as np

from weylfem.report import FAIL, PASS, VerificationReport


def sample():
    r = VerificationReport("demo", ["k", "value"])
    r.add(True, k=1, value=0.1)
    r.add("skipped: unresolved", k=2, value=float("nan"))
    r.constants["c"] = np.float64(1.5)
    r.provenance["seed"] = 3
    return r


def test_status_mapping_and_overall():
    r = sample()
    assert r.rows[0]["status"] == PASS
    assert r.passed and r.overall == PASS
    r.add(np.bool_(False), k=3, value=2.0)
    assert r.rows[-1]["status"] == FAIL
    assert not r.passed and len(r.failures) == 1
    assert "1 failed, 1 skipped" in r.summary()


def test_csv_layout_and_determinism():
    texts = []
    for _ in range(2):
        buf = io.StringIO()
        sample().write_csv(buf)
        texts.append(buf.getvalue())
    assert texts[0] == texts[1]
    lines = texts[0].splitlines()
    assert lines[:5] == ["# check = demo", "# seed = 3", "# c = 1.5", "# overall = pass", "k,value,status"]
    assert lines[5] == "1,0.1,pass"
    assert lines[6] == "2,nan,skipped: unresolved"


def test_json_round_trip():
    buf = io.StringIO()
    sample().write_json(buf)
    data = json.loads(buf.getvalue())
    assert data["metadata"]["overall"] == "pass"
    assert data["metadata"]["constants"] == {"c": 1.5}
    assert data["rows"][0] == {"k": 1, "value": 0.1, "status": "pass"}
    assert data["rows"][1]["value"] == "nan"
