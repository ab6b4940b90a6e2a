import pytest

import past

SMALL = {
    "n_locations": 800,
    "n_objects": 120,
    "n_areas": 8,
    "area_radius": 120,
    "period_days": 14,
    "visits_per_period": 6,
    "n_clones": 3,
    "grid_cols": 32,
    "grid_rows": 32,
    "workers": 3,
    "slot_bits": 6,
}
FOREVER = (0, 10**9)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("past") / "data"
    args = ["gen", "--out-dir", str(d), "--seed", "11"]
    for k, v in SMALL.items():
        args += ["--set", f"{k}={v}"]
    past.cli(*args)
    past.cli("ingest", "-d", str(d))
    return d


def first_object(data_dir):
    with open(data_dir / "edges.txt") as f:
        for line in f:
            if line.strip() and not line.startswith("#"):
                return int(line.split(",")[0])
    raise AssertionError("no edges generated")


def test_verify_passes(data_dir):
    out = past.cli("verify", "-d", str(data_dir), "--objects", "3")
    rows = out.strip().splitlines()
    assert rows[0].startswith("query,plan")
    assert all(r.split(",")[8] == "ok" for r in rows[1:])


def test_usage_error_code():
    code, _, err = past.run_cli(["frobnicate"])
    assert code == 2
    assert err


def test_plans_agree(data_dir):
    store = past.Store(str(data_dir))
    assert store.workers == 3
    obj = first_object(data_dir)
    st = store.q1(obj, *FOREVER, plan="st")
    st_bytes = store.last_stats["bytes_read"]
    kt = store.q1(obj, *FOREVER, plan="kt")
    assert st == kt and len(st) > 0
    assert store.last_stats["bytes_read"] < st_bytes
    assert store.q2(obj, obj, *FOREVER, plan="st") == store.q2(obj, obj, *FOREVER, plan="kt")
    q3 = {p: store.q3(obj, *FOREVER, plan=p) for p in ("st", "kt", "ktst")}
    assert q3["st"] == q3["kt"] == q3["ktst"]
    assert store.q3(obj, *FOREVER, plan="ktst", filters=False) == q3["ktst"]
    assert store.q4(*FOREVER, plan="st") == store.q4(*FOREVER, plan="kt")


def test_clones_found(data_dir):
    store = past.Store(str(data_dir))
    clones = set()
    with open(data_dir / "ground_truth.txt") as f:
        for line in f:
            if line.startswith("clone "):
                clones.add(int(line.split()[1]))
    assert len(clones) == SMALL["n_clones"]
    assert clones <= set(store.q4(*FOREVER))


def test_stored_bytes_ratio(data_dir):
    sb = past.Store(str(data_dir)).stored_bytes()
    assert len(sb["st"]) == len(sb["kt"]) == 3
    assert 1.5 < sum(sb["st"]) / sum(sb["kt"]) < 2.5


def test_missing_store_raises(tmp_path):
    with pytest.raises(OSError):
        past.Store(str(tmp_path))


def test_geometry_helpers():
    assert past.z_encode(0, 0) == 0
    assert past.z_encode(1, 0) == 1
    assert past.z_encode(0, 1) == 2
    assert past.z_encode(3, 3) == 15
    assert 0 <= past.slot_of(123456789, 10) < 1024
    assert past.sf_lower_bound(1.0, 1.0, 0.0) == pytest.approx(1.0)
    assert past.sf_lower_bound(2.0, 1.0, 1.0) == pytest.approx(1.0 - 7.0 / 16.0)
    with pytest.raises(ValueError):
        past.sf_lower_bound(0.0, 1.0, 1.0)


def test_time_ranges():
    assert past.candidate_time_ranges(5, 0.0, 3600) == [5]
    assert past.candidate_time_ranges(5, 1800.0, 3600) == [4, 5, 6]


def test_planner():
    assert past.select_plan("Q1", 100) == "kt"
    assert past.select_plan("Q3", 100, x=2000) == "ktst"
    kt = past.estimate("Q1", "kt", 100)
    st = past.estimate("Q1", "st", 100)
    assert 0 < kt < st
    assert past.estimate("Q1", "kt", 200) > kt
    with pytest.raises(ValueError):
        past.estimate("Q9", "kt", 1)
