import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempadapt.errors import ConfigError, DataError, IngestionError
from tempadapt.features import (
    CONTEXT_COLUMNS,
    DYNAMIC_COLUMNS,
    BuildingContext,
    Scaler,
    aggregate_hourly,
    apply_scaler,
    build_frame,
    encode_context,
    encode_cyclical,
    fit_scaler,
)

CTX = [
    BuildingContext("a", 9.06, 7.49, 60.0, 40.0, "dark", True),
    BuildingContext("b", 9.10, 7.50, 45.0, 25.0, "light", False),
]


def _records(rows):
    return pd.DataFrame(rows, columns=["timestamp", "building_id", "indoor_temp_c"])


def _weather(start="2024-02-01T00:00Z", hours=48, skip=()):
    ts = pd.date_range(start, periods=hours, freq="h")
    w = pd.DataFrame(
        {
            "timestamp": ts,
            "air_temp_c": 25 + 5 * np.sin(np.arange(hours) / 4),
            "rel_humidity": 50.0 + np.arange(hours) % 7,
            "dew_point_c": 12.0,
            "surface_pressure_hpa": 1010.0,
            "total_precip_mm": 0.0,
        }
    )
    return w.drop(index=list(skip)).reset_index(drop=True)


def _hourly(bid, start="2024-02-01T00:00Z", hours=48):
    ts = pd.date_range(start, periods=hours, freq="h")
    return pd.DataFrame({"timestamp": ts, "building_id": bid, "indoor_temp_c": 28 + np.cos(np.arange(hours) / 3)})


def test_hourly_max_rule():
    recs = _records([("2024-02-01T10:05Z", "a", 30.1), ("2024-02-01T10:25Z", "a", 30.4), ("2024-02-01T10:45Z", "a", 29.9)])
    out = aggregate_hourly(recs)
    assert len(out) == 1
    assert out["indoor_temp_c"].iloc[0] == 30.4
    assert out["timestamp"].iloc[0] == pd.Timestamp("2024-02-01T10:00Z")


def test_single_reading_and_gap():
    recs = _records([("2024-02-01T10:05Z", "a", 30.1), ("2024-02-01T12:50Z", "a", 31.0)])
    out = aggregate_hourly(recs)
    assert list(out["indoor_temp_c"]) == [30.1, 31.0]
    assert list(out["timestamp"].dt.hour) == [10, 12]


def test_empty_records():
    assert aggregate_hourly(_records([])).empty


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 59), st.sampled_from("ab"), st.floats(-10, 60)), min_size=1, max_size=40),
       st.randoms())
def test_aggregation_is_order_invariant(rows, rnd):
    base = pd.Timestamp("2024-02-01T00:00Z")
    recs = _records([(base + pd.Timedelta(hours=h, minutes=m), b, v) for h, m, b, v in rows])
    shuffled = recs.sample(frac=1.0, random_state=rnd.randint(0, 2**31)).reset_index(drop=True)
    pd.testing.assert_frame_equal(aggregate_hourly(recs), aggregate_hourly(shuffled))


@pytest.mark.parametrize("value,period,expected", [(0, 24, (0.0, 1.0)), (6, 24, (1.0, 0.0)), (12, 24, (0.0, -1.0)), (90, 360, (1.0, 0.0))])
def test_cyclical_examples(value, period, expected):
    assert encode_cyclical(value, period) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(0.5, 1000))
def test_cyclical_on_unit_circle_and_periodic(value, period):
    s, c = encode_cyclical(value, period)
    assert s * s + c * c == pytest.approx(1.0, abs=1e-12)
    s2, c2 = encode_cyclical(value + period, period)
    assert (s2, c2) == pytest.approx((s, c), abs=1e-9)


def test_cyclical_rejects_bad_period():
    with pytest.raises(ConfigError):
        encode_cyclical(1.0, 0.0)


def test_context_encoding():
    light = BuildingContext("x", 0, 0, 10, 1, "light", False)
    dark = BuildingContext("y", 0, 0, 10, 1, "dark", True)
    assert list(encode_context(light)[:2]) == [0.0, 0.0]
    assert list(encode_context(dark)[:2]) == [2.0, 1.0]
    sc = Scaler(mean={"area_m2": 20.0, "occupancy": 3.0}, std={"area_m2": 5.0, "occupancy": 2.0})
    assert list(encode_context(dark, sc)[2:]) == [-2.0, -1.0]


def test_unknown_roof_lists_allowed_labels():
    with pytest.raises(DataError, match="light, medium, dark"):
        BuildingContext("x", 0, 0, 10, 1, "green", False)


@pytest.mark.parametrize("kwargs", [dict(lat=91), dict(lon=-181), dict(area_m2=0.0), dict(occupancy=-1)])
def test_context_validation(kwargs):
    base = dict(building_id="x", lat=0.0, lon=0.0, area_m2=10.0, occupancy=1.0, roof_color="light", ceiling_board=False)
    with pytest.raises(DataError):
        BuildingContext(**{**base, **kwargs})


def test_scaler_standardises():
    t = pd.DataFrame({"v": [1.0, 2.0, 3.0]})
    sc = fit_scaler(t, ["v"])
    z = sc.transform(t)["v"].to_numpy()
    assert z.mean() == pytest.approx(0.0, abs=1e-15)
    assert z.std() == pytest.approx(1.0, abs=1e-15)


def test_scaler_uses_only_masked_rows():
    t = pd.DataFrame({"v": [1.0, 3.0, 100.0]})
    sc = fit_scaler(t, ["v"], mask=[True, True, False])
    assert (sc.mean["v"], sc.std["v"]) == (2.0, 1.0)


def test_zero_variance_column_is_named():
    with pytest.raises(ConfigError, match="'flat'"):
        fit_scaler(pd.DataFrame({"v": [1.0, 2.0], "flat": [3.0, 3.0]}), ["v", "flat"])


def test_scaler_rejects_no_rows():
    with pytest.raises(ConfigError):
        fit_scaler(pd.DataFrame({"v": [1.0]}), ["v"], mask=[False])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30).filter(lambda v: np.std(v) > 1e-3))
def test_scaler_round_trip(values):
    t = pd.DataFrame({"v": values})
    sc = fit_scaler(t, ["v"])
    back = sc.inverse_transform(sc.transform(t))
    assert np.allclose(back["v"], t["v"], rtol=0, atol=1e-9)
    assert Scaler.from_dict(sc.to_dict()) == sc


def test_frame_aligned_inputs():
    sensor = pd.concat([_hourly("a"), _hourly("b")], ignore_index=True)
    f = build_frame(sensor, _weather(), CTX)
    assert len(f) == 96
    assert f.segment_lengths() == [48, 48]
    assert not f.table[DYNAMIC_COLUMNS + CONTEXT_COLUMNS].isna().any().any()
    row = f.table[f.table["building_id"] == "a"].iloc[0]
    assert (row["roof_code"], row["ceiling_board"], row["area_m2"]) == (2.0, 1.0, 60.0)
    assert np.array_equal(f.table["indoor_temp_obs"], f.table["indoor_temp_c"])


def test_missing_weather_hour_splits_segment():
    f = build_frame(_hourly("a"), _weather(skip=[20]), CTX)
    assert len(f) == 47
    assert f.segment_lengths() == [20, 27]
    assert f.dropped_hours == 1


def test_low_join_coverage_is_an_ingestion_error():
    with pytest.raises(IngestionError, match="timezones"):
        build_frame(_hourly("a"), _weather(start="2024-02-03T00:00Z"), CTX)


def test_missing_context_and_duplicate_weather():
    with pytest.raises(IngestionError, match="no building context for: z"):
        build_frame(_hourly("z"), _weather(), CTX)
    w = _weather()
    with pytest.raises(IngestionError, match="duplicate"):
        build_frame(_hourly("a"), pd.concat([w, w.iloc[:1]]), CTX)


def test_apply_scaler_once():
    f = build_frame(_hourly("a"), _weather(), CTX)
    sc = fit_scaler(f.table, ["air_temp_c"])
    g = apply_scaler(sc, f)
    assert g.scaled and g.table["air_temp_c"].mean() == pytest.approx(0.0, abs=1e-12)
    # the target column stays in degrees
    assert np.array_equal(g.table["indoor_temp_c"], f.table["indoor_temp_c"])
    with pytest.raises(ConfigError):
        apply_scaler(sc, g)


def test_synthetic_frames_pass_validators(small_bundle):
    from tempadapt.pipeline import domain_frame

    for d in small_bundle.domains.values():
        f = domain_frame(d)
        t = f.table
        assert not t[DYNAMIC_COLUMNS + CONTEXT_COLUMNS].isna().any().any()
        assert t["indoor_temp_c"].between(-10, 60).all()
        assert t["rel_humidity"].between(0, 100).all()
        for _, seg in f.segments():
            assert (seg["timestamp"].diff().dropna() == pd.Timedelta(hours=1)).all()
